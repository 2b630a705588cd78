#include <charconv>
#include <map>
#include <sstream>

#include "wfctl/def/definition.hpp"

namespace wfctl::def {

namespace {

struct Token {
  std::string_view text;
  int column = 0;
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

struct PendingOp {
  OperationDef op;
  int line = 0;
  int column = 0;
};

struct BranchBuilder {
  BranchDef branch;
  std::vector<PendingOp> ops;
  bool has_parent = false;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  WorkflowDefinition run() {
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      std::size_t end = text_.find('\n', pos);
      if (end == std::string_view::npos) end = text_.size();
      std::string_view line = text_.substr(pos, end - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_no;
      line_ = line_no;
      handle_line(line);
      pos = end + 1;
    }
    if (!have_workflow_) fail(1, 1, "missing 'workflow' directive");
    finish_branch();
    return std::move(def_);
  }

 private:
  [[noreturn]] void fail(int line, int column, const std::string& msg) {
    throw ParseError(line, column, msg);
  }
  [[noreturn]] void fail(const Token& tok, const std::string& msg) {
    fail(line_, tok.column, msg);
  }

  std::string identifier(const Token& tok, const char* what) {
    if (!is_identifier(tok.text)) {
      fail(tok, std::string("malformed ") + what + " '" + std::string(tok.text) + "'");
    }
    return std::string(tok.text);
  }

  std::string digits(const Token& tok) {
    if (!is_digit_string(tok.text)) {
      fail(tok, "malformed digit string '" + std::string(tok.text) +
                    "' (digits must be 0 or 1)");
    }
    return std::string(tok.text);
  }

  long integer(const Token& tok, const char* what) {
    long value = 0;
    auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), value);
    if (ec != std::errc() || ptr != tok.text.data() + tok.text.size()) {
      fail(tok, std::string("expected integer ") + what + ", got '" + std::string(tok.text) + "'");
    }
    return value;
  }

  void expect_keyword(const std::vector<Token>& toks, std::size_t i, std::string_view kw) {
    if (i >= toks.size()) {
      int col = toks.empty() ? 1 : toks.back().column + static_cast<int>(toks.back().text.size());
      fail(line_, col, "expected '" + std::string(kw) + "'");
    }
    if (toks[i].text != kw) {
      fail(toks[i], "expected '" + std::string(kw) + "', got '" + std::string(toks[i].text) + "'");
    }
  }

  const Token& arg(const std::vector<Token>& toks, std::size_t i, const char* what) {
    if (i >= toks.size()) {
      int col = toks.back().column + static_cast<int>(toks.back().text.size());
      fail(line_, col, std::string("missing ") + what);
    }
    return toks[i];
  }

  void require_count(const std::vector<Token>& toks, std::size_t n) {
    if (toks.size() > n) fail(toks[n], "unexpected token '" + std::string(toks[n].text) + "'");
  }

  BranchBuilder& current(const Token& tok) {
    if (!current_) fail(tok, "'" + std::string(tok.text) + "' outside of a branch");
    return *current_;
  }

  void handle_line(std::string_view line) {
    auto toks = tokenize(line);
    if (toks.empty()) return;
    const Token& head = toks.front();
    if (head.text != "workflow" && !have_workflow_) {
      fail(head, "first directive must be 'workflow'");
    }
    if (head.text == "workflow") {
      if (have_workflow_) fail(head, "duplicate 'workflow' directive");
      def_.name = identifier(arg(toks, 1, "workflow name"), "workflow name");
      require_count(toks, 2);
      have_workflow_ = true;
    } else if (head.text == "version") {
      if (current_) fail(head, "'version' must precede the first branch");
      std::size_t start = static_cast<std::size_t>(arg(toks, 1, "version text").column - 1);
      std::string_view rest = line.substr(start);
      auto hash = rest.find(" #");
      if (hash != std::string_view::npos) rest = rest.substr(0, hash);
      while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\t')) rest.remove_suffix(1);
      def_.version = std::string(rest);
    } else if (head.text == "branch") {
      parse_branch(toks);
    } else if (head.text == "parent") {
      parse_parent(toks);
    } else if (head.text == "state") {
      auto& b = current(head);
      std::string d = digits(arg(toks, 1, "state digits"));
      require_count(toks, 2);
      if (b.branch.find_state(d) != nullptr) {
        fail(toks[1], "duplicate state '" + d + "' in branch '" + b.branch.name + "'");
      }
      b.branch.states.push_back(StateDef{d, {}});
    } else if (head.text == "op") {
      parse_op(toks);
    } else {
      fail(head, "unknown directive '" + std::string(head.text) + "'");
    }
  }

  void parse_branch(const std::vector<Token>& toks) {
    finish_branch();
    BranchBuilder b;
    b.branch.name = identifier(arg(toks, 1, "branch name"), "branch name");
    for (const auto& existing : def_.branches) {
      if (existing.name == b.branch.name) {
        fail(toks[1], "duplicate branch '" + b.branch.name + "'");
      }
    }
    expect_keyword(toks, 2, "level");
    long level = integer(arg(toks, 3, "level"), "level");
    if (level < 1) fail(toks[3], "level must be >= 1");
    b.branch.level = static_cast<int>(level);
    expect_keyword(toks, 4, "start");
    b.branch.start_state = digits(arg(toks, 5, "start digits"));
    require_count(toks, 6);
    current_ = std::move(b);
  }

  void parse_parent(const std::vector<Token>& toks) {
    auto& b = current(toks[0]);
    if (b.has_parent) fail(toks[0], "duplicate 'parent' directive in branch '" + b.branch.name + "'");
    ParentLink link;
    link.branch = identifier(arg(toks, 1, "parent branch"), "parent branch");
    expect_keyword(toks, 2, "digit");
    long idx = integer(arg(toks, 3, "digit index"), "digit index");
    if (idx < 0) fail(toks[3], "digit index must be >= 0");
    link.digit_index = static_cast<std::size_t>(idx);
    require_count(toks, 4);
    b.branch.parent = link;
    b.has_parent = true;
  }

  void parse_op(const std::vector<Token>& toks) {
    auto& b = current(toks[0]);
    PendingOp pending;
    pending.line = line_;
    pending.column = toks[0].column;
    OperationDef& op = pending.op;
    op.name = identifier(arg(toks, 1, "operation name"), "operation name");
    bool have_kind = false, have_from = false, have_to = false, have_steps = false;
    std::size_t i = 2;
    while (i < toks.size()) {
      const Token& key = toks[i];
      const Token& value = arg(toks, i + 1, "clause value");
      if (key.text == "kind") {
        if (have_kind) fail(key, "duplicate 'kind'");
        auto kind = parse_kind(value.text);
        if (!kind) fail(value, "unknown operation kind '" + std::string(value.text) + "'");
        op.kind = *kind;
        have_kind = true;
      } else if (key.text == "from") {
        if (have_from) fail(key, "duplicate 'from'");
        op.source = digits(value);
        have_from = true;
      } else if (key.text == "to") {
        if (have_to) fail(key, "duplicate 'to'");
        op.target = digits(value);
        have_to = true;
      } else if (key.text == "steps") {
        if (have_steps) fail(key, "duplicate 'steps'");
        have_steps = true;
        if (value.text != "-") {
          std::string_view rest = value.text;
          while (true) {
            auto comma = rest.find(',');
            std::string_view item = rest.substr(0, comma);
            if (!is_identifier(item)) {
              fail(value, "malformed step name '" + std::string(item) + "'");
            }
            op.steps.emplace_back(item);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
          }
        }
      } else if (key.text == "emits") {
        if (op.emits_parent_op) fail(key, "duplicate 'emits'");
        op.emits_parent_op = identifier(value, "parent operation");
      } else if (key.text == "reinit-child") {
        std::string child = identifier(value, "child branch");
        for (const auto& c : op.reinit_children) {
          if (c == child) fail(value, "duplicate reinit-child '" + child + "'");
        }
        op.reinit_children.push_back(child);
      } else {
        fail(key, "unknown op clause '" + std::string(key.text) + "'");
      }
      i += 2;
    }
    int end_col = toks.back().column + static_cast<int>(toks.back().text.size());
    if (!have_kind) fail(line_, end_col, "op '" + op.name + "' missing 'kind'");
    if (!have_from) fail(line_, end_col, "op '" + op.name + "' missing 'from'");
    if (!have_to) fail(line_, end_col, "op '" + op.name + "' missing 'to'");
    for (const auto& other : b.ops) {
      if (other.op.name == op.name && other.op.source == op.source) {
        fail(toks[1], "duplicate operation '" + op.name + "' from state '" + op.source + "'");
      }
    }
    b.ops.push_back(std::move(pending));
  }

  void finish_branch() {
    if (!current_) return;
    BranchBuilder b = std::move(*current_);
    current_.reset();
    for (auto& pending : b.ops) {
      StateDef* state = b.branch.find_state(pending.op.source);
      if (state == nullptr) {
        fail(pending.line, pending.column,
             "operation '" + pending.op.name + "' leaves undeclared state '" +
                 pending.op.source + "' in branch '" + b.branch.name + "'");
      }
      state->operations.push_back(std::move(pending.op));
    }
    def_.branches.push_back(std::move(b.branch));
  }

  std::string_view text_;
  int line_ = 0;
  bool have_workflow_ = false;
  WorkflowDefinition def_;
  std::optional<BranchBuilder> current_;
};

}  // namespace

WorkflowDefinition parse_definition(std::string_view source_text) {
  return Parser(source_text).run();
}

std::string serialize(const WorkflowDefinition& def) {
  std::ostringstream out;
  out << "workflow " << def.name << "\n";
  if (!def.version.empty()) out << "version " << def.version << "\n";
  for (const auto& branch : def.branches) {
    out << "\nbranch " << branch.name << " level " << branch.level << " start "
        << branch.start_state << "\n";
    if (branch.parent) {
      out << "parent " << branch.parent->branch << " digit " << branch.parent->digit_index << "\n";
    }
    for (const auto& state : branch.states) out << "state " << state.digits << "\n";
    for (const auto& state : branch.states) {
      for (const auto& op : state.operations) {
        out << "op " << op.name << " kind " << to_string(op.kind) << " from " << op.source
            << " to " << op.target << " steps ";
        if (op.steps.empty()) {
          out << "-";
        } else {
          for (std::size_t i = 0; i < op.steps.size(); ++i) {
            if (i) out << ",";
            out << op.steps[i];
          }
        }
        if (op.emits_parent_op) out << " emits " << *op.emits_parent_op;
        for (const auto& child : op.reinit_children) out << " reinit-child " << child;
        out << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace wfctl::def
