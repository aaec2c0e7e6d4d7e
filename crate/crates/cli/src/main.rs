fn main() {
    std::process::exit(fairify_cli::run(std::env::args_os()));
}
