fn main() {
    std::process::exit(bellviol::run(std::env::args_os()));
}
