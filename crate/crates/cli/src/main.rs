fn main() {
    std::process::exit(calr_cli::run_command(std::env::args_os()));
}
