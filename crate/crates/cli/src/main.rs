fn main() {
    std::process::exit(monsoon_cli::run(std::env::args_os()));
}
