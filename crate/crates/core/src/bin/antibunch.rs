fn main() {
    std::process::exit(antibunch::cli::run(std::env::args().skip(1)));
}
