fn main() {
    std::process::exit(goalchain::cli::main_with_args(std::env::args_os()));
}
