fn main() {
    std::process::exit(ingrasp::cli::main_with(std::env::args_os()));
}
