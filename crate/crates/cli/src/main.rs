fn main() {
    std::process::exit(ltm_cli::run(std::env::args_os()));
}
