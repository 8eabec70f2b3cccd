fn main() {
    std::process::exit(hierdetect::cli::main_with_args(std::env::args_os()));
}
