fn main() {
    std::process::exit(emos::cli::main_with_args(std::env::args_os()));
}
