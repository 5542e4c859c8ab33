fn main() {
    std::process::exit(cellres_cli::run_cli(std::env::args_os()));
}
