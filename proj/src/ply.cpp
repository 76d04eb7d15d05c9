#include "n3map/ply.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include "n3map/errors.hpp"

namespace n3map::ply {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

Type parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return Type::kInt8;
  if (s == "uchar" || s == "uint8") return Type::kUInt8;
  if (s == "short" || s == "int16") return Type::kInt16;
  if (s == "ushort" || s == "uint16") return Type::kUInt16;
  if (s == "int" || s == "int32") return Type::kInt32;
  if (s == "uint" || s == "uint32") return Type::kUInt32;
  if (s == "float" || s == "float32") return Type::kFloat32;
  if (s == "double" || s == "float64") return Type::kFloat64;
  throw FormatError("ply: unknown property type '" + s + "'");
}

const char* type_name(Type t) {
  switch (t) {
    case Type::kInt8: return "char";
    case Type::kUInt8: return "uchar";
    case Type::kInt16: return "short";
    case Type::kUInt16: return "ushort";
    case Type::kInt32: return "int";
    case Type::kUInt32: return "uint";
    case Type::kFloat32: return "float";
    case Type::kFloat64: return "double";
  }
  return "float";
}

size_t type_size(Type t) {
  switch (t) {
    case Type::kInt8:
    case Type::kUInt8: return 1;
    case Type::kInt16:
    case Type::kUInt16: return 2;
    case Type::kInt32:
    case Type::kUInt32:
    case Type::kFloat32: return 4;
    case Type::kFloat64: return 8;
  }
  return 4;
}

bool is_integral(Type t) { return t != Type::kFloat32 && t != Type::kFloat64; }

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode(Type t, const char* p) {
  switch (t) {
    case Type::kInt8: return load<int8_t>(p);
    case Type::kUInt8: return load<uint8_t>(p);
    case Type::kInt16: return load<int16_t>(p);
    case Type::kUInt16: return load<uint16_t>(p);
    case Type::kInt32: return load<int32_t>(p);
    case Type::kUInt32: return load<uint32_t>(p);
    case Type::kFloat32: return load<float>(p);
    case Type::kFloat64: return load<double>(p);
  }
  return 0.0;
}

template <typename T>
void store(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void encode(Type t, double v, std::string& out) {
  switch (t) {
    case Type::kInt8: store(out, static_cast<int8_t>(v)); break;
    case Type::kUInt8: store(out, static_cast<uint8_t>(v)); break;
    case Type::kInt16: store(out, static_cast<int16_t>(v)); break;
    case Type::kUInt16: store(out, static_cast<uint16_t>(v)); break;
    case Type::kInt32: store(out, static_cast<int32_t>(v)); break;
    case Type::kUInt32: store(out, static_cast<uint32_t>(v)); break;
    case Type::kFloat32: store(out, static_cast<float>(v)); break;
    case Type::kFloat64: store(out, v); break;
  }
}

enum class Format { kAscii, kBinaryLE };

struct Cursor {
  const std::string& data;
  size_t pos;

  const char* take(size_t n) {
    if (pos + n > data.size()) throw FormatError("ply: truncated body");
    const char* p = data.data() + pos;
    pos += n;
    return p;
  }
};

}  // namespace

const Property* Element::find(const std::string& prop) const {
  for (const auto& p : properties)
    if (p.name == prop) return &p;
  return nullptr;
}

const Element* File::find(const std::string& element) const {
  for (const auto& e : elements)
    if (e.name == element) return &e;
  return nullptr;
}

File parse(const std::string& bytes) {
  File file;
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    if (pos >= bytes.size()) throw FormatError("ply: header not terminated by end_header");
    size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) throw FormatError("ply: header not terminated by end_header");
    std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") throw FormatError("ply: missing 'ply' magic");
  std::optional<Format> format;
  for (;;) {
    std::string line = next_line();
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word.empty() || word == "comment" || word == "obj_info") continue;
    if (word == "end_header") break;
    if (word == "format") {
      std::string kind, version;
      ss >> kind >> version;
      if (kind == "ascii") format = Format::kAscii;
      else if (kind == "binary_little_endian") format = Format::kBinaryLE;
      else throw FormatError("ply: unsupported format '" + kind + "'");
    } else if (word == "element") {
      Element e;
      long long count = -1;
      ss >> e.name >> count;
      if (e.name.empty() || count < 0 || ss.fail())
        throw FormatError("ply: malformed element line '" + line + "'");
      e.count = static_cast<size_t>(count);
      file.elements.push_back(std::move(e));
    } else if (word == "property") {
      if (file.elements.empty()) throw FormatError("ply: property before element");
      Property p;
      std::string t;
      ss >> t;
      if (t == "list") {
        std::string ct, it;
        ss >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_type(ct);
        p.type = parse_type(it);
        if (!is_integral(p.count_type)) throw FormatError("ply: list count must be integral");
      } else {
        p.type = parse_type(t);
        ss >> p.name;
      }
      if (p.name.empty()) throw FormatError("ply: malformed property line '" + line + "'");
      file.elements.back().properties.push_back(std::move(p));
    } else {
      throw FormatError("ply: unexpected header keyword '" + word + "'");
    }
  }
  if (!format) throw FormatError("ply: missing format line");

  if (*format == Format::kBinaryLE) {
    Cursor cur{bytes, pos};
    for (auto& e : file.elements) {
      for (auto& p : e.properties) {
        if (p.is_list) p.lists.resize(e.count);
        else p.scalars.resize(e.count);
      }
      for (size_t i = 0; i < e.count; ++i) {
        for (auto& p : e.properties) {
          if (p.is_list) {
            double n = decode(p.count_type, cur.take(type_size(p.count_type)));
            if (n < 0) throw FormatError("ply: negative list length");
            auto& list = p.lists[i];
            list.resize(static_cast<size_t>(n));
            for (auto& v : list)
              v = static_cast<int64_t>(decode(p.type, cur.take(type_size(p.type))));
          } else {
            p.scalars[i] = decode(p.type, cur.take(type_size(p.type)));
          }
        }
      }
    }
  } else {
    std::istringstream body(bytes.substr(pos));
    auto read_num = [&]() {
      std::string tok;
      if (!(body >> tok)) throw FormatError("ply: truncated ascii body");
      try {
        size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw FormatError("ply: bad number '" + tok + "'");
        return v;
      } catch (const std::logic_error&) {
        // stod throws for nan/inf spellings it cannot parse and for overflow
        throw FormatError("ply: bad number '" + tok + "'");
      }
    };
    for (auto& e : file.elements) {
      for (auto& p : e.properties) {
        if (p.is_list) p.lists.resize(e.count);
        else p.scalars.resize(e.count);
      }
      for (size_t i = 0; i < e.count; ++i) {
        for (auto& p : e.properties) {
          if (p.is_list) {
            double n = read_num();
            if (n < 0) throw FormatError("ply: negative list length");
            auto& list = p.lists[i];
            list.resize(static_cast<size_t>(n));
            for (auto& v : list) v = static_cast<int64_t>(read_num());
          } else {
            p.scalars[i] = read_num();
          }
        }
      }
    }
  }
  return file;
}

File read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("ply: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

void write(const std::filesystem::path& path, const File& file) {
  std::string out = "ply\nformat binary_little_endian 1.0\n";
  for (const auto& e : file.elements) {
    out += "element " + e.name + " " + std::to_string(e.count) + "\n";
    for (const auto& p : e.properties) {
      if (p.is_list)
        out += std::string("property list ") + type_name(p.count_type) + " " + type_name(p.type) +
               " " + p.name + "\n";
      else
        out += std::string("property ") + type_name(p.type) + " " + p.name + "\n";
    }
  }
  out += "end_header\n";
  for (const auto& e : file.elements) {
    for (size_t i = 0; i < e.count; ++i) {
      for (const auto& p : e.properties) {
        if (p.is_list) {
          const auto& list = p.lists.at(i);
          encode(p.count_type, static_cast<double>(list.size()), out);
          for (int64_t v : list) encode(p.type, static_cast<double>(v), out);
        } else {
          encode(p.type, p.scalars.at(i), out);
        }
      }
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("ply: cannot write " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw FormatError("ply: write failed for " + path.string());
}

}  // namespace n3map::ply
