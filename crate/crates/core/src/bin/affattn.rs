fn main() {
    std::process::exit(affattn::cli::run(std::env::args_os()));
}
