fn main() {
    std::process::exit(sdai_cli::main_with(std::env::args_os()));
}
