#pragma once

#include "mech/compiler/compiler.hpp"
#include "mech/kb/knowledgebase.hpp"
#include "mech/lang/mech_format.hpp"
#include "generators.hpp"

#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace mech::test {

std::string corpus_text(const std::string& name);
ModelDocument parse_ok(const std::string& text, const std::string& file = "<test>");
CompiledModel compile_ok(const ModelDocument& doc, const CompileOptions& options = {});
CompiledModel compile_corpus(const std::string& name, const CompileOptions& options = {});

std::filesystem::path fixture_path(const std::string& name);
std::string read_file(const std::filesystem::path& path);

/// Replaces the first `from` after `anchor` with `to`; fails the test when
/// either is missing.
std::string mutate(const std::string& text, const std::string& anchor, const std::string& from,
                   const std::string& to);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);


}  // namespace mech::test
