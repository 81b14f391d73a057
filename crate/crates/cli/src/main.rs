fn main() {
    std::process::exit(tablesp_cli::run(std::env::args_os()));
}
