#include "forge/assets.hpp"

#include "forge/errors.hpp"
#include "forge/html.hpp"
#include "forge/util.hpp"

#include <zlib.h>

#include <algorithm>
#include <set>
#include <sstream>

namespace forge {

using nlohmann::json;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_u32(out, static_cast<std::uint32_t>(
                   crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

std::string esc(const std::string& s) { return html::escape_text(s); }

std::string num(double v) { return util::fixed(v, 1); }

std::string calendar_heatmap(const json& spec) {
  const int year = spec.value("year", 2026);
  const int month = spec.value("month", 1);
  static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int days = kDays[std::clamp(month, 1, 12) - 1];
  if (month == 2 && ((year % 4 == 0 && year % 100 != 0) || year % 400 == 0)) days = 29;
  const int first = util::weekday_index(year, month, 1);
  const int cell = 48;
  const int left = 20, top = 60;
  const int weeks = (first + days + 6) / 7;
  const int legend_top = top + weeks * cell + 20;
  const auto bands = spec.value("bands", json::array());
  const int height = legend_top + static_cast<int>(bands.size()) * 22 + 10;
  const int width = left * 2 + 7 * cell;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  o << "<text x=\"" << left << "\" y=\"24\" font-size=\"16\" font-family=\"sans-serif\">"
    << esc(spec.value("title", "")) << "</text>\n";
  static const char* kWeek[] = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
  for (int c = 0; c < 7; ++c) {
    o << "<text x=\"" << left + c * cell + 12 << "\" y=\"" << top - 8
      << "\" font-size=\"11\" font-family=\"sans-serif\">" << kWeek[c] << "</text>\n";
  }
  std::set<int> marked;
  for (const auto& m : spec.value("marked", json::array())) marked.insert(m.get<int>());
  for (int d = 1; d <= days; ++d) {
    const int slot = first + d - 1;
    const int x = left + (slot % 7) * cell;
    const int y = top + (slot / 7) * cell;
    std::string fill = "#eeeeee";
    for (const auto& b : bands) {
      if (d >= b.value("from", 0) && d <= b.value("to", 0)) fill = b.value("color", fill);
    }
    o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell - 2 << "\" height=\"" << cell - 2
      << "\" fill=\"" << esc(fill) << "\"/>\n";
    o << "<text x=\"" << x + 4 << "\" y=\"" << y + 14 << "\" font-size=\"11\" font-family=\"sans-serif\">" << d
      << "</text>\n";
    if (marked.count(d)) {
      o << "<line x1=\"" << x + 4 << "\" y1=\"" << y + 4 << "\" x2=\"" << x + cell - 6 << "\" y2=\"" << y + cell - 6
        << "\" stroke=\"#333333\" stroke-width=\"2\"/>\n";
    }
  }
  int ly = legend_top;
  for (const auto& b : bands) {
    o << "<rect x=\"" << left << "\" y=\"" << ly << "\" width=\"14\" height=\"14\" fill=\""
      << esc(b.value("color", "#eeeeee")) << "\"/>\n";
    o << "<text x=\"" << left + 20 << "\" y=\"" << ly + 12 << "\" font-size=\"12\" font-family=\"sans-serif\">"
      << esc(b.value("label", "")) << "</text>\n";
    ly += 22;
  }
  o << "</svg>\n";
  return o.str();
}

std::string line_chart(const json& spec) {
  const auto labels = spec.value("x_labels", json::array());
  const auto series = spec.value("series", json::array());
  const double y_max = spec.value("y_max", 100.0);
  const int width = 640, height = 360, left = 50, right = 160, top = 40, bottom = 40;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const std::size_t n = std::max<std::size_t>(labels.size(), 2);
  auto px = [&](std::size_t i) { return left + plot_w * static_cast<double>(i) / static_cast<double>(n - 1); };
  auto py = [&](double v) { return top + plot_h * (1.0 - std::clamp(v / y_max, 0.0, 1.0)); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  o << "<text x=\"" << left << "\" y=\"24\" font-size=\"16\" font-family=\"sans-serif\">"
    << esc(spec.value("title", "")) << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
    << top + plot_h << "\" stroke=\"#999999\"/>\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    o << "<text x=\"" << num(px(i) - 8) << "\" y=\"" << height - 18 << "\" font-size=\"10\" font-family=\"sans-serif\">"
      << esc(labels[i].get<std::string>()) << "</text>\n";
  }
  int ly = top;
  for (const auto& s : series) {
    const std::string color = s.value("color", "#000000");
    std::string points;
    const auto values = s.value("values", json::array());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!points.empty()) points += ' ';
      points += num(px(i)) + "," + num(py(values[i].get<double>()));
    }
    o << "<polyline fill=\"none\" stroke=\"" << esc(color) << "\" stroke-width=\"2\" points=\"" << points << "\"/>\n";
    o << "<rect x=\"" << width - right + 10 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\"" << esc(color)
      << "\"/>\n";
    o << "<text x=\"" << width - right + 28 << "\" y=\"" << ly + 11 << "\" font-size=\"12\" font-family=\"sans-serif\">"
      << esc(s.value("name", "")) << "</text>\n";
    ly += 20;
  }
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart(const json& spec) {
  const auto bars = spec.value("bars", json::array());
  double y_max = spec.value("y_max", 0.0);
  for (const auto& b : bars) y_max = std::max(y_max, b.value("value", 0.0));
  if (y_max <= 0) y_max = 1;
  const int width = 80 + 60 * static_cast<int>(std::max<std::size_t>(bars.size(), 1)), height = 300;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  o << "<text x=\"20\" y=\"24\" font-size=\"16\" font-family=\"sans-serif\">" << esc(spec.value("title", ""))
    << "</text>\n";
  int x = 40;
  for (const auto& b : bars) {
    const double h = 200.0 * b.value("value", 0.0) / y_max;
    o << "<rect x=\"" << x << "\" y=\"" << num(250 - h) << "\" width=\"40\" height=\"" << num(h) << "\" fill=\""
      << esc(b.value("color", "#4477aa")) << "\"/>\n";
    o << "<text x=\"" << x << "\" y=\"270\" font-size=\"10\" font-family=\"sans-serif\">"
      << esc(b.value("label", "")) << "</text>\n";
    x += 60;
  }
  o << "</svg>\n";
  return o.str();
}

} // namespace

std::string solid_png(int width, int height, unsigned char r, unsigned char g, unsigned char b) {
  std::string raw;
  raw.reserve(static_cast<std::size_t>(height) * (1 + 3 * static_cast<std::size_t>(width)));
  for (int y = 0; y < height; ++y) {
    raw.push_back('\0');
    for (int x = 0; x < width; ++x) {
      raw.push_back(static_cast<char>(r));
      raw.push_back(static_cast<char>(g));
      raw.push_back(static_cast<char>(b));
    }
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::string z(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &len, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error("png compression failed");
  }
  z.resize(len);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", "");
  return out;
}

std::string render_chart_svg(const json& spec) {
  const std::string type = spec.value("type", "");
  if (type == "calendar_heatmap") return calendar_heatmap(spec);
  if (type == "line") return line_chart(spec);
  if (type == "bar") return bar_chart(spec);
  throw AssemblyError("unknown chart type '" + type + "'");
}

std::string StubAssetProvider::fetch(const AssetRequest& request) {
  if (request.kind == "image") {
    if (!util::ends_with(request.path, ".png")) throw AssemblyError("asset " + request.path + ": stub images are PNG");
    const auto h = util::fnv1a64(request.prompt.empty() ? request.path : request.prompt);
    // Keep placeholders in a soft pastel range.
    return solid_png(96, 64, static_cast<unsigned char>(128 + (h & 0x7f)),
                     static_cast<unsigned char>(128 + ((h >> 8) & 0x7f)),
                     static_cast<unsigned char>(128 + ((h >> 16) & 0x7f)));
  }
  if (request.kind == "chart") {
    if (!util::ends_with(request.path, ".svg")) throw AssemblyError("asset " + request.path + ": charts are SVG");
    try {
      return render_chart_svg(request.spec);
    } catch (const AssemblyError& e) {
      throw AssemblyError("asset " + request.path + ": " + e.what());
    } catch (const json::exception& e) {
      throw AssemblyError("asset " + request.path + ": bad chart spec: " + e.what());
    }
  }
  throw AssemblyError("asset " + request.path + ": unknown kind '" + request.kind + "'");
}

} // namespace forge
