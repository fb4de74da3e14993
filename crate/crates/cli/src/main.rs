fn main() {
    std::process::exit(hbg_cli::run_cli(std::env::args()));
}
