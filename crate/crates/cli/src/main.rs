fn main() {
    std::process::exit(rydberg_mis_cli::app::run(std::env::args_os()));
}
