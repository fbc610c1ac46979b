fn main() {
    std::process::exit(maac::cli::run_cli());
}
