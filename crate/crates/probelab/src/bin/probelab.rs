fn main() {
    std::process::exit(probelab::cli::run());
}
