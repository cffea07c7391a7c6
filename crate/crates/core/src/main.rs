fn main() {
    std::process::exit(dotphase::cli::cli_dispatch(std::env::args()));
}
