fn main() {
    specfield::cli::main_entry();
}
