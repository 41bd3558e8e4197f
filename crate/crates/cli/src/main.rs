fn main() {
    std::process::exit(epictrl::run(std::env::args_os()));
}
