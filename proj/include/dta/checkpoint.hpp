#pragma once

#include <filesystem>
#include <iosfwd>

#include "dta/seq2seq.hpp"

namespace dta {

// Binary container: "DTAM", format version, scalar width, model config,
// then every tensor as (name, rows, cols, data). Loading checks the stored
// shapes against the config and converts the scalar type when needed.
template <typename T>
void save_model(const Seq2Seq<T>& model, std::ostream& out);
template <typename T>
void save_model(const Seq2Seq<T>& model, const std::filesystem::path& path);

template <typename T>
Seq2Seq<T> load_model(std::istream& in);
template <typename T>
Seq2Seq<T> load_model(const std::filesystem::path& path);

// FNV-1a over the file bytes, hex encoded.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace dta
