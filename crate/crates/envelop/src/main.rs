fn main() {
    std::process::exit(envelop::cli::run(std::env::args_os()));
}
