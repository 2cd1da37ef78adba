#include "support.hpp"

#include <fstream>
#include <sstream>

namespace mech::test {

std::string corpus_text(const std::string& name) {
    for (const auto& f : builtin_corpus_files())
        if (f.name == name) return f.text;
    FAIL("no corpus file " << name);
    return {};
}

ModelDocument parse_ok(const std::string& text, const std::string& file) {
    ParseResult r = parse_mech(text, file);
    INFO(render_text(r.diagnostics));
    REQUIRE(r.ok());
    return *r.document;
}

CompiledModel compile_ok(const ModelDocument& doc, const CompileOptions& options) {
    CompileResult r = compile(doc, options);
    INFO(render_text(r.diagnostics));
    REQUIRE(r.ok());
    return *r.compiled;
}

CompiledModel compile_corpus(const std::string& name, const CompileOptions& options) {
    return compile_ok(parse_ok(corpus_text(name), name), options);
}

std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(MECH_TEST_DATA) / "fixtures" / name;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot read " << path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string mutate(const std::string& text, const std::string& anchor, const std::string& from,
                   const std::string& to) {
    auto a = text.find(anchor);
    REQUIRE_MESSAGE(a != std::string::npos, "anchor not found: " << anchor);
    auto f = text.find(from, a);
    REQUIRE_MESSAGE(f != std::string::npos, "text not found: " << from);
    return text.substr(0, f) + to + text.substr(f + from.size());
}

std::filesystem::path temp_dir(const std::string& tag) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("mech-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}


}  // namespace mech::test
