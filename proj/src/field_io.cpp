#include "bdlab/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

namespace bdlab {
namespace {

constexpr const char* kAxisKeys[] = {"nx", "ny", "nz"};

void put_f64le(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

double get_f64le(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw ConfigError("field file body is truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

template <int Dim>
void write_fields(const std::filesystem::path& path, const FieldBundle<Dim>& bundle, FieldFormat format) {
  const Grid<Dim>& grid = *bundle.grid;
  if (bundle.names.size() != bundle.fields.size()) throw InvalidParameter("one name per field is required");
  for (const auto& f : bundle.fields) {
    if (f.values().cols() != grid.num_nodes()) throw DomainError("field does not live on the bundle grid");
  }
  nlohmann::json header;
  for (int d = 0; d < Dim; ++d) header[kAxisKeys[d]] = grid.cells()(d);
  header["domain"] = {{"lo", std::vector<double>(grid.lo().data(), grid.lo().data() + Dim)},
                      {"hi", std::vector<double>(grid.hi().data(), grid.hi().data() + Dim)}};
  header["fields"] = bundle.names;
  header["components"] = Dim;
  header["format"] = format == FieldFormat::Csv ? "csv" : "f64le";

  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
  os << header.dump() << '\n';
  if (format == FieldFormat::Csv) {
    os << std::setprecision(17);
    const char* coord[] = {"x", "y", "z"};
    for (int d = 0; d < Dim; ++d) os << (d ? "," : "") << coord[d];
    for (const auto& name : bundle.names) {
      for (int d = 0; d < Dim; ++d) os << ',' << name << '_' << d;
    }
    os << '\n';
    for (int i = 0; i < grid.num_nodes(); ++i) {
      const auto x = grid.node_point(i);
      for (int d = 0; d < Dim; ++d) os << (d ? "," : "") << x(d);
      for (const auto& f : bundle.fields) {
        for (int d = 0; d < Dim; ++d) os << ',' << f.values()(d, i);
      }
      os << '\n';
    }
  } else {
    for (int i = 0; i < grid.num_nodes(); ++i) {
      for (const auto& f : bundle.fields) {
        for (int d = 0; d < Dim; ++d) put_f64le(os, f.values()(d, i));
      }
    }
  }
  if (!os) throw ConfigError("write to " + path.string() + " failed");
}

template <int Dim>
FieldBundle<Dim> read_fields(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": bad header: " + e.what());
  }
  FieldBundle<Dim> bundle;
  typename Grid<Dim>::Point lo, hi;
  typename Grid<Dim>::Multi cells;
  try {
    for (int d = 0; d < Dim; ++d) {
      cells(d) = header.at(kAxisKeys[d]).get<int>();
      lo(d) = header.at("domain").at("lo").at(d).get<double>();
      hi(d) = header.at("domain").at("hi").at(d).get<double>();
    }
    if (header.value("components", Dim) != Dim) throw ConfigError(path.string() + ": component count mismatch");
    bundle.names = header.at("fields").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": bad header: " + e.what());
  }
  bundle.grid = Grid<Dim>::Make(lo, hi, cells);
  const Grid<Dim>& grid = *bundle.grid;
  for (std::size_t k = 0; k < bundle.names.size(); ++k) bundle.fields.emplace_back(bundle.grid);
  const std::string format = header.value("format", std::string("csv"));
  if (format == "csv") {
    std::getline(is, line);  // column names
    for (int i = 0; i < grid.num_nodes(); ++i) {
      if (!std::getline(is, line)) throw ConfigError(path.string() + ": body is truncated");
      std::stringstream row(line);
      std::string cell;
      for (int d = 0; d < Dim; ++d) std::getline(row, cell, ',');
      for (auto& f : bundle.fields) {
        for (int d = 0; d < Dim; ++d) {
          if (!std::getline(row, cell, ',')) throw ConfigError(path.string() + ": short row");
          f.values()(d, i) = std::stod(cell);
        }
      }
    }
  } else if (format == "f64le") {
    for (int i = 0; i < grid.num_nodes(); ++i) {
      for (auto& f : bundle.fields) {
        for (int d = 0; d < Dim; ++d) f.values()(d, i) = get_f64le(is);
      }
    }
  } else {
    throw ConfigError(path.string() + ": unknown format '" + format + "'");
  }
  return bundle;
}

template void write_fields(const std::filesystem::path&, const FieldBundle<2>&, FieldFormat);
template void write_fields(const std::filesystem::path&, const FieldBundle<3>&, FieldFormat);
template FieldBundle<2> read_fields(const std::filesystem::path&);
template FieldBundle<3> read_fields(const std::filesystem::path&);

}  // namespace bdlab
