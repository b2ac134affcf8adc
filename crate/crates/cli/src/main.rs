fn main() {
    std::process::exit(cverify_cli::run(std::env::args_os()));
}
