#include "uamsim/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "uamsim/errors.hpp"

namespace uamsim::nn {

namespace {

void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& header, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << "uamsim.checkpoint 1\n";
  out << header << "\n";
  for (const Param& p : store.params) {
    out << "param " << p.name << " " << p.shape.size();
    for (int d : p.shape) out << " " << d;
    out << "\n";
  }
  out << "DATA\n";
  for (const Param& p : store.params) {
    for (double v : p.value) write_f64_le(out, v);
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "uamsim.checkpoint 1") throw ParseError("not a checkpoint file: " + path);

  LoadedCheckpoint out;
  std::getline(in, out.header);
  while (std::getline(in, line)) {
    if (line == "DATA") break;
    std::istringstream ls(line);
    std::string tag, name;
    std::size_t ndim = 0;
    ls >> tag >> name >> ndim;
    if (tag != "param" || !ls) throw ParseError("malformed checkpoint header line: " + line);
    Shape shape(ndim);
    for (std::size_t i = 0; i < ndim; ++i) ls >> shape[i];
    if (!ls) throw ParseError("malformed checkpoint shape line: " + line);
    out.store.add(name, shape);
  }
  for (Param& p : out.store.params) {
    for (double& v : p.value) v = read_f64_le(in);
  }
  if (!in) throw ParseError("truncated checkpoint: " + path);
  return out;
}

}  // namespace uamsim::nn
