fn main() {
    std::process::exit(nv_readout_cli::main_with(std::env::args_os()));
}
