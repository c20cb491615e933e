fn main() {
    std::process::exit(hyperchi::cli::run());
}
