fn main() {
    std::process::exit(erdosavoid_cli::run(std::env::args().collect()));
}
