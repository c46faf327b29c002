fn main() {
    std::process::exit(dpsoa::harness::cli::run(std::env::args_os()));
}
