fn main() {
    std::process::exit(carefulness::harness::cli::main_with(std::env::args_os()));
}
