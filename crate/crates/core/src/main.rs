fn main() {
    std::process::exit(willmore::cli::main_with_args(std::env::args_os()));
}
