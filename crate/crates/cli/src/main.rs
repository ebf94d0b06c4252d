fn main() {
    std::process::exit(vstab_cli::run(std::env::args_os()));
}
