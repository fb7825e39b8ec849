fn main() {
    std::process::exit(lbt_cli::run(std::env::args().collect()));
}
