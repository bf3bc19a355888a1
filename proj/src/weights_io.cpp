#include "utlsa/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "utlsa/errors.hpp"

namespace utlsa {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'U', 'T', 'L', 'S'};

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n, "tensor name");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void get_floats(std::vector<float>& out, std::size_t n, const std::string& name) {
    if (n > (bytes_.size() - pos_) / sizeof(float))
      throw FormatError(origin_ + ": truncated payload for tensor '" + name + "'");
    out.resize(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(origin_ + ": truncated while reading " + what);
  }

  const std::string& bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

std::string dims_string(const std::vector<std::uint32_t>& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

}  // namespace

std::string encode_container(const std::vector<NamedTensor>& tensors) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF) throw ArgumentError("tensor name too long: " + t.name.substr(0, 32));
    if (t.dims.size() > 0xFF) throw ArgumentError("tensor rank too large: " + t.name);
    std::size_t count = 1;
    for (const auto d : t.dims) count *= d;
    if (count != t.values.size())
      throw ArgumentError("tensor '" + t.name + "' has " + std::to_string(t.values.size()) +
                          " values but shape " + dims_string(t.dims));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (const auto d : t.dims) put<std::uint32_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(float));
  }
  return out;
}

std::vector<NamedTensor> decode_container(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(origin + ": bad magic (expected UTLS)");
  Reader r(bytes, origin);
  r.get_string(4);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kContainerVersion)
    throw FormatError(origin + ": unsupported container version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = r.get<std::uint16_t>("name length");
    t.name = r.get_string(name_len);
    const auto rank = r.get<std::uint8_t>("rank");
    std::size_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.get<std::uint32_t>("dims"));
      n *= t.dims.back();
    }
    r.get_floats(t.values, n, t.name);
    tensors.push_back(std::move(t));
  }
  if (!r.done()) throw FormatError(origin + ": trailing bytes after last tensor");
  return tensors;
}

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const std::string bytes = encode_container(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

std::vector<NamedTensor> read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_container(bytes, path.string());
}

void save_weights(const ModelParams& params, const std::filesystem::path& path) {
  std::vector<NamedTensor> tensors;
  // The visitor only reads.
  for_each_tensor(const_cast<ModelParams&>(params), [&](const TensorRef& t) {
    tensors.push_back({t.name, t.dims, std::vector<float>(t.values.begin(), t.values.end())});
  });
  write_container(path, tensors);
}

ModelParams load_weights(const std::filesystem::path& path) {
  auto tensors = read_container(path);
  std::map<std::string, NamedTensor*> by_name;
  for (auto& t : tensors) {
    if (!by_name.emplace(t.name, &t).second)
      throw FormatError(path.string() + ": duplicate tensor '" + t.name + "'");
  }
  ModelParams params{make_encoder_shapes(), make_decoder_shapes()};
  for_each_tensor(params, [&](const TensorRef& ref) {
    const auto it = by_name.find(ref.name);
    if (it == by_name.end()) throw FormatError(path.string() + ": missing tensor '" + ref.name + "'");
    const NamedTensor& t = *it->second;
    if (t.dims != ref.dims)
      throw FormatError(path.string() + ": tensor '" + ref.name + "' has shape " + dims_string(t.dims) +
                        ", expected " + dims_string(ref.dims));
    std::copy(t.values.begin(), t.values.end(), ref.values.begin());
    by_name.erase(it);
  });
  if (!by_name.empty())
    throw FormatError(path.string() + ": unexpected tensor '" + by_name.begin()->first + "'");
  return params;
}

void save_delta(const std::filesystem::path& path, const DeltaFile& file) {
  if (file.seed >= kMaxStoredSeed)
    throw ArgumentError("seed " + std::to_string(file.seed) + " is not exactly representable in the delta file");
  write_container(path, {
                            {"delta", {static_cast<std::uint32_t>(file.delta.size())}, file.delta.samples},
                            {"epsilon", {1}, {file.epsilon}},
                            {"seed", {1}, {static_cast<float>(file.seed)}},
                        });
}

DeltaFile load_delta(const std::filesystem::path& path) {
  const auto tensors = read_container(path);
  DeltaFile out;
  bool have_delta = false, have_eps = false, have_seed = false;
  for (const auto& t : tensors) {
    if (t.name == "delta" && t.dims.size() == 1) {
      out.delta = Waveform(t.values);
      have_delta = true;
    } else if (t.name == "epsilon" && t.values.size() == 1) {
      out.epsilon = t.values[0];
      have_eps = true;
    } else if (t.name == "seed" && t.values.size() == 1) {
      out.seed = static_cast<std::uint64_t>(t.values[0]);
      have_seed = true;
    } else {
      throw FormatError(path.string() + ": unexpected tensor '" + t.name + "' " + dims_string(t.dims));
    }
  }
  if (!have_delta || !have_eps || !have_seed)
    throw FormatError(path.string() + ": delta file needs tensors delta, epsilon and seed");
  return out;
}

}  // namespace utlsa
