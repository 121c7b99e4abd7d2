fn main() {
    std::process::exit(dissipext::cli::run());
}
