fn main() {
    std::process::exit(horodrift::runner::run_cli(std::env::args().skip(1)));
}
