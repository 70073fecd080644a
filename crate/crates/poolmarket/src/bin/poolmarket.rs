fn main() {
    std::process::exit(poolmarket::cli::run(std::env::args().collect()));
}
