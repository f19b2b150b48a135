fn main() {
    std::process::exit(viscoflow::cli::main_with_args(std::env::args_os()));
}
