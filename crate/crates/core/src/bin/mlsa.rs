fn main() {
    std::process::exit(mlsa::harness::cli::main_with_args(std::env::args_os()));
}
