fn main() {
    std::process::exit(kvfrac::cli::main_with_args(std::env::args_os()));
}
