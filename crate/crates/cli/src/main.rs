fn main() {
    std::process::exit(seizure_cli::run(std::env::args_os()));
}
