fn main() {
    std::process::exit(tfm_lab::cli::main());
}
