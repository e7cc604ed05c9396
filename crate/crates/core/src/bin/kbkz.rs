fn main() {
    std::process::exit(kbkz::cli::main_with_args(std::env::args_os()));
}
