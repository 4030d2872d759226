fn main() {
    std::process::exit(equimix::cli::run(std::env::args_os()));
}
