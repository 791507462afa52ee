fn main() {
    std::process::exit(assert_forge::cli::dispatch(std::env::args().skip(1)));
}
