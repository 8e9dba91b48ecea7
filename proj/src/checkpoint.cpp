#include "dta/checkpoint.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dta/error.hpp"
#include "dta/text.hpp"

namespace dta {

namespace {

constexpr std::array<char, 4> kMagic{'D', 'T', 'A', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::ostream& out, V value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(V));
}

template <typename V>
V get(std::istream& in) {
  V value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(V));
  if (!in) throw Error("checkpoint: truncated file");
  return value;
}

template <typename S, typename T>
void read_tensor(std::istream& in, Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(get<S>(in));
}

}  // namespace

template <typename T>
void save_model(const Seq2Seq<T>& model, std::ostream& out) {
  const auto& c = model.config();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, sizeof(T));
  for (int v : {c.encoder_vocab, c.decoder_vocab, c.embedding_dim, c.hidden}) put<std::int32_t>(out, v);
  put<double>(out, c.dropout);
  put<double>(out, c.init_range);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tied.size()));
  for (int t : c.tied) put<std::int32_t>(out, t);
  std::uint32_t count = 0;
  model.params().for_each([&](const char*, const auto&) { ++count; });
  put<std::uint32_t>(out, count);
  model.params().for_each([&](const char* name, const auto& m) {
    const auto len = static_cast<std::uint32_t>(std::strlen(name));
    put<std::uint32_t>(out, len);
    out.write(name, len);
    put<std::int64_t>(out, m.rows());
    put<std::int64_t>(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(T)));
  });
  if (!out) throw Error("checkpoint: write failed");
}

template <typename T>
void save_model(const Seq2Seq<T>& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save_model(model, out);
}

template <typename T>
Seq2Seq<T> load_model(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw Error("checkpoint: unsupported version " + std::to_string(version));
  const auto width = get<std::uint32_t>(in);
  if (width != 4 && width != 8) throw Error("checkpoint: bad scalar width");
  ModelConfig c;
  c.encoder_vocab = get<std::int32_t>(in);
  c.decoder_vocab = get<std::int32_t>(in);
  c.embedding_dim = get<std::int32_t>(in);
  c.hidden = get<std::int32_t>(in);
  c.dropout = get<double>(in);
  c.init_range = get<double>(in);
  const auto tied = get<std::uint32_t>(in);
  if (tied > 10'000'000) throw Error("checkpoint: corrupt tie map");
  for (std::uint32_t i = 0; i < tied; ++i) c.tied.push_back(get<std::int32_t>(in));

  Seq2Seq<T> model(c, 0);
  const auto count = get<std::uint32_t>(in);
  std::uint32_t expected = 0;
  model.params().for_each([&](const char*, auto&) { ++expected; });
  if (count != expected) throw Error("checkpoint: tensor count mismatch");
  model.params().for_each([&](const char* name, auto& m) {
    const auto len = get<std::uint32_t>(in);
    if (len > 256) throw Error("checkpoint: corrupt tensor name");
    std::string stored(len, '\0');
    in.read(stored.data(), len);
    if (stored != name) throw Error("checkpoint: expected tensor " + std::string(name) + ", found " + stored);
    const auto rows = get<std::int64_t>(in), cols = get<std::int64_t>(in);
    if (rows != m.rows() || cols != m.cols())
      throw Error("checkpoint: shape mismatch for " + stored + ": stored " + std::to_string(rows) + "x" +
                  std::to_string(cols) + ", config implies " + std::to_string(m.rows()) + "x" +
                  std::to_string(m.cols()));
    if (width == 4)
      read_tensor<float>(in, m);
    else
      read_tensor<double>(in, m);
  });
  if (!model.params().finite()) throw Error("checkpoint: non-finite parameters");
  return model;
}

template <typename T>
Seq2Seq<T> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return load_model<T>(in);
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ostringstream hex;
  hex << std::hex;
  hex.width(16);
  hex.fill('0');
  hex << fnv1a64(bytes);
  return hex.str();
}

template void save_model(const Seq2Seq<float>&, std::ostream&);
template void save_model(const Seq2Seq<double>&, std::ostream&);
template void save_model(const Seq2Seq<float>&, const std::filesystem::path&);
template void save_model(const Seq2Seq<double>&, const std::filesystem::path&);
template Seq2Seq<float> load_model(std::istream&);
template Seq2Seq<double> load_model(std::istream&);
template Seq2Seq<float> load_model(const std::filesystem::path&);
template Seq2Seq<double> load_model(const std::filesystem::path&);

}  // namespace dta
