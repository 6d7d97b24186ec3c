fn main() {
    std::process::exit(rscp_cli::run(std::env::args_os()));
}
