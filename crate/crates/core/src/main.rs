fn main() {
    std::process::exit(gogap::cli::run(std::env::args_os()));
}
