fn main() {
    std::process::exit(floosim::cli::main_with_args(std::env::args().collect()));
}
