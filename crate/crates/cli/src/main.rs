fn main() {
    std::process::exit(maxspi_cli::run_cli(std::env::args_os()));
}
