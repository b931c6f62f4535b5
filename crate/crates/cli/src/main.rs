fn main() {
    std::process::exit(droopvolt_cli::cli_main(std::env::args_os()));
}
