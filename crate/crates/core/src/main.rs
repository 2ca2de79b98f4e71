fn main() {
    std::process::exit(daqs::cli::main_with_args(std::env::args_os()));
}
