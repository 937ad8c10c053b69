#include "tworld/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <variant>

namespace tworld {

namespace {

struct Node {
  std::variant<std::string, std::vector<Node>> value;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Node parse_document() {
    skip_ws();
    // Optional `identifier =` prefix, as in an assignment statement.
    const std::size_t save = pos_;
    if (pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '=') {
        ++pos_;
      } else {
        pos_ = save;
      }
    }
    skip_ws();
    Node root = parse_value("");
    skip_ws();
    if (pos_ != text_.size()) fail("", "trailing characters after prompt grid");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) line += text_[i] == '\n';
    throw ParseError("prompt grid" + path + ": " + what + " (line " + std::to_string(line) + ")");
  }

  void skip_ws() {
    while (pos_ < text_.size()) {
      if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      } else if (text_[pos_] == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Node parse_value(const std::string& path) {
    skip_ws();
    if (pos_ >= text_.size()) fail(path, "unexpected end of input");
    if (text_[pos_] == '[') return parse_list(path);
    if (text_[pos_] == '"') return Node{parse_string(path)};
    fail(path, std::string("unexpected character '") + text_[pos_] + "'");
  }

  Node parse_list(const std::string& path) {
    ++pos_;  // '['
    std::vector<Node> items;
    for (;;) {
      skip_ws();
      if (pos_ >= text_.size()) fail(path, "unterminated list");
      if (text_[pos_] == ']') {
        ++pos_;
        break;
      }
      items.push_back(parse_value(path + "[" + std::to_string(items.size()) + "]"));
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
      } else if (pos_ < text_.size() && text_[pos_] != ']') {
        fail(path, "expected ',' or ']'");
      }
    }
    return Node{std::move(items)};
  }

  std::string parse_string(const std::string& path) {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char ch = text_[pos_++];
      if (ch == '\n') fail(path, "newline inside string");
      if (ch == '\\') {
        if (pos_ >= text_.size()) break;
        const char esc = text_[pos_++];
        switch (esc) {
          case 'n': ch = '\n'; break;
          case 't': ch = '\t'; break;
          case '"': ch = '"'; break;
          case '\\': ch = '\\'; break;
          case '\'': ch = '\''; break;
          default: fail(path, std::string("unknown escape \\") + esc);
        }
      }
      out.push_back(ch);
    }
    if (pos_ >= text_.size()) fail(path, "unterminated string");
    ++pos_;  // closing quote
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

const std::vector<Node>& as_list(const Node& node, const std::string& path, const char* level) {
  if (const auto* list = std::get_if<std::vector<Node>>(&node.value)) {
    if (list->empty()) throw ParseError("prompt grid" + path + ": empty " + level + " list");
    return *list;
  }
  throw ParseError("prompt grid" + path + ": expected a " + std::string(level) + " list, found a string");
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(ch);
  }
  return out + "\"";
}

}  // namespace

PromptGrid parse_prompt_grid(std::string_view text) {
  const Node root = Parser(text).parse_document();
  const auto& xs = as_list(root, "", "outer (x)");
  PromptGrid grid;
  int ny = -1, nz = -1;
  std::vector<std::string> cells;
  for (std::size_t x = 0; x < xs.size(); ++x) {
    const std::string px = "[" + std::to_string(x) + "]";
    const auto& ys = as_list(xs[x], px, "middle (y)");
    if (ny < 0) ny = int(ys.size());
    if (int(ys.size()) != ny)
      throw ParseError("prompt grid" + px + ": ragged grid, expected " + std::to_string(ny) + " entries, found " +
                       std::to_string(ys.size()));
    for (std::size_t y = 0; y < ys.size(); ++y) {
      const std::string py = px + "[" + std::to_string(y) + "]";
      const auto& zs = as_list(ys[y], py, "innermost (z)");
      if (nz < 0) nz = int(zs.size());
      if (int(zs.size()) != nz)
        throw ParseError("prompt grid" + py + ": ragged grid, expected " + std::to_string(nz) + " entries, found " +
                         std::to_string(zs.size()));
      for (std::size_t z = 0; z < zs.size(); ++z) {
        const std::string pz = py + "[" + std::to_string(z) + "]";
        const auto* s = std::get_if<std::string>(&zs[z].value);
        if (!s) throw ParseError("prompt grid" + pz + ": expected a string, found a list");
        if (s->empty()) throw ParseError("prompt grid" + pz + ": empty prompt string");
        cells.push_back(*s);
      }
    }
  }
  grid.cells = Coord(int(xs.size()), ny, nz);
  grid.prompts = std::move(cells);
  return grid;
}

PromptGrid load_prompt_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open prompt grid file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_prompt_grid(ss.str());
}

PromptGrid uniform_prompt(std::string prompt) {
  if (prompt.empty()) throw ParseError("prompt must be non-empty");
  PromptGrid grid;
  grid.cells = Coord::Ones();
  grid.prompts = {std::move(prompt)};
  return grid;
}

std::string format_prompt_grid(const PromptGrid& grid) {
  std::string out = "[";
  for (int x = 0; x < grid.cells.x(); ++x) {
    out += x ? ", [\n" : "[\n";
    for (int y = 0; y < grid.cells.y(); ++y) {
      out += "    [";
      for (int z = 0; z < grid.cells.z(); ++z) out += (z ? ", " : "") + quote(grid.at(Coord(x, y, z)));
      out += "],\n";
    }
    out += "]";
  }
  return out + "]\n";
}

const std::string& condition_for_tile(const PromptGrid& grid, const Coord& origin, int tile_size) {
  // A single cell covers any world.
  if ((grid.cells == 1).all()) return grid.prompts.front();
  const int cell = grid.cell_size > 0 ? grid.cell_size : tile_size;
  const Coord centre = origin + tile_size / 2;
  const Coord index = centre / cell;
  if ((centre < 0).any() || (index >= grid.cells).any())
    throw BoundsError("tile centre " + to_string(centre) + " lies outside the prompt grid of " + to_string(grid.cells) +
                      " cells of size " + std::to_string(cell));
  return grid.at(index);
}

}  // namespace tworld
