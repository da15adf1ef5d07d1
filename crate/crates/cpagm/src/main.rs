fn main() {
    std::process::exit(cpagm::cli::main_with_args(std::env::args_os()));
}
