fn main() {
    std::process::exit(qbl_cli::run(std::env::args_os()));
}
