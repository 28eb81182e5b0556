fn main() {
    std::process::exit(brs_cli::main_with_args(std::env::args_os()));
}
