#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "spiketempo/delay_net.hpp"
#include "spiketempo/error.hpp"

namespace spiketempo {

namespace {

constexpr char kMagic[] = "STNET1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IngestError("checkpoint: truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void put_vec(std::string& out, const std::vector<double>& v) {
  for (double x : v) put_f64(out, x);
}

void put_layer_weights(std::string& out, const DelayLayer& layer) {
  for (std::size_t o = 0; o < layer.n_out; ++o)
    for (std::size_t i = 0; i < layer.n_in; ++i)
      for (std::size_t d = 0; d < layer.taps(); ++d) put_f64(out, layer.w(o, i, d));
}

void get_vec(Reader& r, std::vector<double>& v) {
  for (auto& x : v) x = r.f64();
}

void get_layer_weights(Reader& r, DelayLayer& layer) {
  for (std::size_t o = 0; o < layer.n_out; ++o)
    for (std::size_t i = 0; i < layer.n_in; ++i)
      for (std::size_t d = 0; d < layer.taps(); ++d) layer.w(o, i, d) = r.f64();
}

std::string encode_tensors(const Network& net) {
  std::string out;
  for (const auto& m : net.hidden) {
    put_layer_weights(out, m.conv);
    put_vec(out, m.conv.bias);
    put_vec(out, m.bn.gamma);
    put_vec(out, m.bn.beta);
    put_vec(out, m.bn.running_mean);
    put_vec(out, m.bn.running_var);
  }
  put_layer_weights(out, net.output);
  put_vec(out, net.output.bias);
  return out;
}

}  // namespace

std::size_t checkpoint_tensor_bytes(const Network& net) { return encode_tensors(net).size(); }

std::string encode_checkpoint(const Network& net) {
  std::string out(kMagic, 6);
  const std::string doc = dump_network_spec(net.spec);
  put_u32(out, static_cast<std::uint32_t>(doc.size()));
  out += doc;
  out += encode_tensors(net);
  return out;
}

Network decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.str(6) != std::string(kMagic, 6)) throw IngestError("checkpoint: bad magic");
  const std::uint32_t doc_len = r.u32();
  Network net = build_network(parse_network_spec(r.str(doc_len)), 0);
  for (auto& m : net.hidden) {
    get_layer_weights(r, m.conv);
    get_vec(r, m.conv.bias);
    get_vec(r, m.bn.gamma);
    get_vec(r, m.bn.beta);
    get_vec(r, m.bn.running_mean);
    get_vec(r, m.bn.running_var);
  }
  get_layer_weights(r, net.output);
  get_vec(r, net.output.bias);
  if (!r.done()) throw IngestError("checkpoint: trailing bytes after tensor section");
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  const std::string bytes = encode_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return decode_checkpoint({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

}  // namespace spiketempo
