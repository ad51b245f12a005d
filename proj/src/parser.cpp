#include "relmh/parser.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace relmh {

namespace {

enum class Tok : uint8_t {
  Ident, Nat, Real, Str,
  LParen, RParen, LBrace, RBrace, Comma, Semi, Colon, Hash,
  Assign,   // =
  Tilde,    // ~
  Lt, Le, Gt, Ge, EqEq, Ne,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  SourceSpan span;
};

struct Lexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;
  std::vector<ParseError>* errors;

  explicit Lexer(const std::string& s, std::vector<ParseError>* errs) : src(s), errors(errs) {}

  SourceSpan here() const { return SourceSpan{line, col, pos, pos}; }

  void advance() {
    if (src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos < src.size()) {
      char c = src[pos];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
        continue;
      }
      if (c == '/' && pos + 1 < src.size() && src[pos + 1] == '/') {
        while (pos < src.size() && src[pos] != '\n') advance();
        continue;
      }
      SourceSpan span = here();
      auto push = [&](Tok k, std::string text, int len) {
        for (int i = 0; i < len; ++i) advance();
        span.end = pos;
        out.push_back(Token{k, std::move(text), span});
      };
      if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos;
        while (pos < src.size() &&
               (isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
          advance();
        span.end = pos;
        out.push_back(Token{Tok::Ident, src.substr(start, pos - start), span});
        continue;
      }
      if (isdigit(static_cast<unsigned char>(c))) {
        size_t start = pos;
        bool real = false;
        while (pos < src.size() && isdigit(static_cast<unsigned char>(src[pos]))) advance();
        if (pos < src.size() && src[pos] == '.' && pos + 1 < src.size() &&
            isdigit(static_cast<unsigned char>(src[pos + 1]))) {
          real = true;
          advance();
          while (pos < src.size() && isdigit(static_cast<unsigned char>(src[pos]))) advance();
        }
        if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
          size_t save = pos;
          advance();
          if (pos < src.size() && (src[pos] == '+' || src[pos] == '-')) advance();
          if (pos < src.size() && isdigit(static_cast<unsigned char>(src[pos]))) {
            real = true;
            while (pos < src.size() && isdigit(static_cast<unsigned char>(src[pos]))) advance();
          } else {
            pos = save;  // not an exponent; leave 'e' for the next token
          }
        }
        span.end = pos;
        out.push_back(Token{real ? Tok::Real : Tok::Nat, src.substr(start, pos - start), span});
        continue;
      }
      if (c == '"') {
        advance();
        std::string text;
        bool closed = false;
        while (pos < src.size()) {
          char d = src[pos];
          if (d == '"') {
            advance();
            closed = true;
            break;
          }
          if (d == '\\' && pos + 1 < src.size()) {
            advance();
            text.push_back(src[pos]);
            advance();
            continue;
          }
          if (d == '\n') break;
          text.push_back(d);
          advance();
        }
        span.end = pos;
        if (!closed) errors->push_back({span, "unterminated string literal"});
        out.push_back(Token{Tok::Str, std::move(text), span});
        continue;
      }
      switch (c) {
        case '(': push(Tok::LParen, "(", 1); continue;
        case ')': push(Tok::RParen, ")", 1); continue;
        case '{': push(Tok::LBrace, "{", 1); continue;
        case '}': push(Tok::RBrace, "}", 1); continue;
        case ',': push(Tok::Comma, ",", 1); continue;
        case ';': push(Tok::Semi, ";", 1); continue;
        case ':': push(Tok::Colon, ":", 1); continue;
        case '#': push(Tok::Hash, "#", 1); continue;
        case '~': push(Tok::Tilde, "~", 1); continue;
        case '=':
          if (pos + 1 < src.size() && src[pos + 1] == '=') {
            push(Tok::EqEq, "==", 2);
          } else {
            push(Tok::Assign, "=", 1);
          }
          continue;
        case '!':
          if (pos + 1 < src.size() && src[pos + 1] == '=') {
            push(Tok::Ne, "!=", 2);
            continue;
          }
          break;
        case '<':
          if (pos + 1 < src.size() && src[pos + 1] == '=') {
            push(Tok::Le, "<=", 2);
          } else {
            push(Tok::Lt, "<", 1);
          }
          continue;
        case '>':
          if (pos + 1 < src.size() && src[pos + 1] == '=') {
            push(Tok::Ge, ">=", 2);
          } else {
            push(Tok::Gt, ">", 1);
          }
          continue;
        default: break;
      }
      errors->push_back({span, std::string("unexpected character '") + c + "'"});
      advance();
    }
    out.push_back(Token{Tok::End, "", here()});
    return out;
  }
};

// ---------------------------------------------------------------------------
// Raw (unresolved) syntax tree.

struct RTerm {
  enum class K : uint8_t { Lit, Name, Call, Cmp, Number };
  K k = K::Lit;
  Value lit;
  std::string name;  // Name/Call/Number; Cmp stores the operator here
  std::vector<RTerm> args;
  SourceSpan span;
};

struct RDist {
  std::string name;
  SourceSpan span;
  std::map<std::string, Value> kwargs;
  std::vector<std::pair<Value, double>> catmap;
  bool has_catmap = false;
  std::vector<RTerm> pargs;
  std::optional<std::pair<std::string, std::string>> dummy;  // Uniform(Type x)
};

struct RClause {
  std::optional<RTerm> guard;
  bool is_dist = false;
  RDist dist;
  RTerm eq;
};

struct RParam {
  std::string type, name;
  SourceSpan span;
};

struct RStatement {
  enum class K : uint8_t { Type, Guaranteed, Prior, Number, Random };
  K k;
  SourceSpan span;
  std::string name;               // type name / prior name / function name
  std::string type_name;          // Guaranteed/Number: the type; Random: return type
  std::vector<std::string> symbols;
  RDist dist;
  std::vector<RParam> params;
  std::vector<RClause> clauses;
};

struct SyntaxParser {
  const std::vector<Token>& toks;
  size_t i = 0;
  std::vector<ParseError>& errors;

  SyntaxParser(const std::vector<Token>& t, std::vector<ParseError>& e) : toks(t), errors(e) {}

  const Token& cur() const { return toks[i]; }
  const Token& peek(size_t k = 1) const { return toks[std::min(i + k, toks.size() - 1)]; }
  bool at(Tok k) const { return cur().kind == k; }
  bool at_ident(const char* kw) const { return at(Tok::Ident) && cur().text == kw; }

  Token take() { return toks[i++]; }

  bool expect(Tok k, const char* what) {
    if (at(k)) {
      ++i;
      return true;
    }
    errors.push_back({cur().span, std::string("expected ") + what});
    return false;
  }

  std::string expect_ident(const char* what) {
    if (at(Tok::Ident)) return take().text;
    errors.push_back({cur().span, std::string("expected ") + what});
    return "";
  }

  void recover() {
    while (!at(Tok::End) && !at(Tok::Semi)) ++i;
    if (at(Tok::Semi)) ++i;
  }

  std::optional<Value> literal() {
    if (at(Tok::Nat)) return Value::nat(std::strtoll(take().text.c_str(), nullptr, 10));
    if (at(Tok::Real)) return Value::real(std::strtod(take().text.c_str(), nullptr));
    if (at(Tok::Str)) return Value::str(take().text);
    if (at_ident("true")) {
      take();
      return Value::boolean(true);
    }
    if (at_ident("false")) {
      take();
      return Value::boolean(false);
    }
    if (at_ident("null")) {
      take();
      return Value::null();
    }
    return std::nullopt;
  }

  // term := cmp_operand (cmpop cmp_operand)?
  std::optional<RTerm> term() {
    std::optional<RTerm> lhs = operand();
    if (!lhs) return std::nullopt;
    const char* op = nullptr;
    switch (cur().kind) {
      case Tok::Lt: op = "<"; break;
      case Tok::Le: op = "<="; break;
      case Tok::Gt: op = ">"; break;
      case Tok::Ge: op = ">="; break;
      case Tok::EqEq: op = "=="; break;
      case Tok::Ne: op = "!="; break;
      default: return lhs;
    }
    SourceSpan span = take().span;
    std::optional<RTerm> rhs = operand();
    if (!rhs) return std::nullopt;
    RTerm t;
    t.k = RTerm::K::Cmp;
    t.name = op;
    t.span = span;
    t.args.push_back(std::move(*lhs));
    t.args.push_back(std::move(*rhs));
    return t;
  }

  std::optional<RTerm> operand() {
    SourceSpan span = cur().span;
    if (at(Tok::LParen)) {
      take();
      std::optional<RTerm> inner = term();
      expect(Tok::RParen, "')'");
      return inner;
    }
    if (at(Tok::Hash)) {
      take();
      RTerm t;
      t.k = RTerm::K::Number;
      t.name = expect_ident("type name");
      t.span = span;
      if (t.name.empty()) return std::nullopt;
      return t;
    }
    if (std::optional<Value> lit = literal()) {
      RTerm t;
      t.k = RTerm::K::Lit;
      t.lit = std::move(*lit);
      t.span = span;
      return t;
    }
    if (at(Tok::Ident)) {
      RTerm t;
      t.name = take().text;
      t.span = span;
      if (at(Tok::LParen)) {
        t.k = RTerm::K::Call;
        take();
        if (!at(Tok::RParen)) {
          while (true) {
            std::optional<RTerm> arg = term();
            if (!arg) return std::nullopt;
            t.args.push_back(std::move(*arg));
            if (at(Tok::Comma)) {
              take();
              continue;
            }
            break;
          }
        }
        expect(Tok::RParen, "')'");
      } else {
        t.k = RTerm::K::Name;
      }
      return t;
    }
    errors.push_back({span, "expected a term"});
    return std::nullopt;
  }

  bool dist_expr(RDist& out) {
    out.span = cur().span;
    out.name = expect_ident("distribution name");
    if (out.name.empty()) return false;
    if (!at(Tok::LParen)) return true;  // bare named prior
    take();
    if (!at(Tok::RParen)) {
      while (true) {
        if (!dist_arg(out)) return false;
        if (at(Tok::Comma)) {
          take();
          continue;
        }
        break;
      }
    }
    return expect(Tok::RParen, "')'");
  }

  bool dist_arg(RDist& out) {
    // keyword: IDENT '=' literal
    if (at(Tok::Ident) && peek().kind == Tok::Assign) {
      std::string key = take().text;
      take();
      std::optional<Value> v = literal();
      if (!v) {
        errors.push_back({cur().span, "keyword argument '" + key + "' needs a literal value"});
        return false;
      }
      out.kwargs[key] = std::move(*v);
      return true;
    }
    // weight table: '{' literal ':' number (',' ...)* '}'
    if (at(Tok::LBrace)) {
      take();
      out.has_catmap = true;
      while (!at(Tok::RBrace)) {
        std::optional<Value> key = literal();
        if (!key) {
          errors.push_back({cur().span, "weight table key must be a literal"});
          return false;
        }
        if (!expect(Tok::Colon, "':'")) return false;
        std::optional<Value> w = literal();
        if (!w || (!w->is_real() && !w->is_nat())) {
          errors.push_back({cur().span, "weight must be a number"});
          return false;
        }
        double weight = w->is_real() ? w->as_real() : double(w->as_nat());
        out.catmap.emplace_back(std::move(*key), weight);
        if (at(Tok::Comma)) take();
      }
      return expect(Tok::RBrace, "'}'");
    }
    // typed dummy: IDENT IDENT  (e.g. Uniform(Pub p))
    if (at(Tok::Ident) && peek().kind == Tok::Ident &&
        (peek(2).kind == Tok::RParen || peek(2).kind == Tok::Comma)) {
      std::string ty = take().text;
      std::string nm = take().text;
      out.dummy = {ty, nm};
      return true;
    }
    std::optional<RTerm> t = term();
    if (!t) return false;
    out.pargs.push_back(std::move(*t));
    return true;
  }

  // clause chain after the function header:
  //   '~' dist | '=' term
  // | 'if' '(' term ')' 'then' body ('else' (chain | body))?
  bool clause_chain(std::vector<RClause>& out) {
    if (at_ident("if")) {
      take();
      if (!expect(Tok::LParen, "'('")) return false;
      std::optional<RTerm> guard = term();
      if (!guard) return false;
      if (!expect(Tok::RParen, "')'")) return false;
      if (!at_ident("then")) {
        errors.push_back({cur().span, "expected 'then'"});
        return false;
      }
      take();
      RClause c;
      c.guard = std::move(*guard);
      if (!clause_body(c)) return false;
      out.push_back(std::move(c));
      if (at_ident("else")) {
        take();
        if (at_ident("if")) return clause_chain(out);
        RClause e;
        if (!clause_body(e)) return false;
        out.push_back(std::move(e));
      }
      return true;
    }
    RClause c;
    if (!clause_body(c)) return false;
    out.push_back(std::move(c));
    return true;
  }

  bool clause_body(RClause& c) {
    if (at(Tok::Tilde)) {
      take();
      c.is_dist = true;
      return dist_expr(c.dist);
    }
    if (at(Tok::Assign)) {
      take();
      std::optional<RTerm> t = term();
      if (!t) return false;
      c.is_dist = false;
      c.eq = std::move(*t);
      return true;
    }
    errors.push_back({cur().span, "expected '~ distribution' or '= term'"});
    return false;
  }

  std::vector<RStatement> run() {
    std::vector<RStatement> out;
    while (!at(Tok::End)) {
      size_t before = i;
      if (!statement(out)) recover();
      if (i == before) recover();  // ensure progress
    }
    return out;
  }

  bool statement(std::vector<RStatement>& out) {
    RStatement st;
    st.span = cur().span;
    if (at_ident("type")) {
      take();
      st.k = RStatement::K::Type;
      st.name = expect_ident("type name");
      if (st.name.empty()) return false;
      out.push_back(std::move(st));
      return expect(Tok::Semi, "';'");
    }
    if (at_ident("guaranteed")) {
      take();
      st.k = RStatement::K::Guaranteed;
      st.type_name = expect_ident("type name");
      if (st.type_name.empty()) return false;
      while (true) {
        std::string sym = expect_ident("object symbol");
        if (sym.empty()) return false;
        st.symbols.push_back(std::move(sym));
        if (at(Tok::Comma)) {
          take();
          continue;
        }
        break;
      }
      out.push_back(std::move(st));
      return expect(Tok::Semi, "';'");
    }
    if (at_ident("prior")) {
      take();
      st.k = RStatement::K::Prior;
      st.name = expect_ident("prior name");
      if (st.name.empty() || !expect(Tok::Assign, "'='")) return false;
      if (!dist_expr(st.dist)) return false;
      out.push_back(std::move(st));
      return expect(Tok::Semi, "';'");
    }
    if (at(Tok::Hash)) {
      take();
      st.k = RStatement::K::Number;
      st.type_name = expect_ident("type name");
      if (st.type_name.empty() || !expect(Tok::Tilde, "'~'")) return false;
      if (!dist_expr(st.dist)) return false;
      out.push_back(std::move(st));
      return expect(Tok::Semi, "';'");
    }
    if (at_ident("random")) {
      take();
      st.k = RStatement::K::Random;
      st.type_name = expect_ident("return type");
      st.name = expect_ident("function name");
      if (st.type_name.empty() || st.name.empty()) return false;
      if (at(Tok::LParen)) {
        take();
        while (!at(Tok::RParen)) {
          RParam p;
          p.span = cur().span;
          p.type = expect_ident("parameter type");
          p.name = expect_ident("parameter name");
          if (p.type.empty() || p.name.empty()) return false;
          st.params.push_back(std::move(p));
          if (at(Tok::Comma)) take();
        }
        if (!expect(Tok::RParen, "')'")) return false;
      }
      if (!clause_chain(st.clauses)) return false;
      out.push_back(std::move(st));
      return expect(Tok::Semi, "';'");
    }
    errors.push_back({cur().span, "expected a declaration (type, guaranteed, prior, #, random)"});
    return false;
  }
};

// ---------------------------------------------------------------------------
// Semantic resolution.

struct Scope {
  const std::vector<std::string>* names = nullptr;
  const std::vector<TypeId>* types = nullptr;

  int find(const std::string& n) const {
    if (!names) return -1;
    for (size_t i = 0; i < names->size(); ++i)
      if ((*names)[i] == n) return static_cast<int>(i);
    return -1;
  }
};

struct Resolver {
  Model& m;
  std::vector<ParseError>& errors;

  void fail(const SourceSpan& span, const std::string& msg) { errors.push_back({span, msg}); }

  static bool type_compat(TypeId want, TypeId got) {
    return got == -1 || want == got;  // -1 = the null literal, allowed anywhere
  }

  std::optional<Term> term(const RTerm& rt, const Scope& scope) {
    Term t;
    t.span = rt.span;
    switch (rt.k) {
      case RTerm::K::Lit: {
        t.kind = Term::Kind::Literal;
        t.literal = rt.lit;
        switch (rt.lit.kind()) {
          case Value::Kind::Bool: t.type = m.boolean_type(); break;
          case Value::Kind::Nat: t.type = m.natural_type(); break;
          case Value::Kind::Real: t.type = m.real_type(); break;
          case Value::Kind::Str: t.type = m.string_type(); break;
          default: t.type = -1; break;
        }
        return t;
      }
      case RTerm::K::Name: {
        int p = scope.find(rt.name);
        if (p >= 0) {
          t.kind = Term::Kind::Param;
          t.param = p;
          t.type = (*scope.types)[p];
          return t;
        }
        if (std::optional<Value> g = m.find_guaranteed(rt.name)) {
          t.kind = Term::Kind::Literal;
          t.literal = *g;
          t.type = g->obj_type();
          return t;
        }
        if (std::optional<FuncId> f = m.find_function(rt.name)) {
          if (!m.function(*f).arg_types.empty()) {
            fail(rt.span, "function " + rt.name + " needs arguments");
            return std::nullopt;
          }
          t.kind = Term::Kind::Apply;
          t.func = *f;
          t.type = m.function(*f).return_type;
          return t;
        }
        fail(rt.span, "unknown name: " + rt.name);
        return std::nullopt;
      }
      case RTerm::K::Call: {
        // Builtins first, then model functions.
        if (rt.name == "Succ" || rt.name == "Pred") {
          if (rt.args.size() != 1) {
            fail(rt.span, rt.name + " takes one argument");
            return std::nullopt;
          }
          std::optional<Term> a = term(rt.args[0], scope);
          if (!a) return std::nullopt;
          if (!type_compat(m.natural_type(), a->type)) {
            fail(rt.span, rt.name + " needs a NaturalNum argument");
            return std::nullopt;
          }
          t.kind = Term::Kind::Builtin;
          t.op = rt.name == "Succ" ? BuiltinOp::Succ : BuiltinOp::Pred;
          t.type = m.natural_type();
          t.args.push_back(std::move(*a));
          return t;
        }
        std::optional<FuncId> f = m.find_function(rt.name);
        if (!f) {
          fail(rt.span, "unknown function: " + rt.name);
          return std::nullopt;
        }
        const FunctionSymbol& fn = m.function(*f);
        if (fn.arg_types.size() != rt.args.size()) {
          fail(rt.span, "function " + rt.name + " takes " +
                            std::to_string(fn.arg_types.size()) + " argument(s), got " +
                            std::to_string(rt.args.size()));
          return std::nullopt;
        }
        t.kind = Term::Kind::Apply;
        t.func = *f;
        t.type = fn.return_type;
        for (size_t k = 0; k < rt.args.size(); ++k) {
          std::optional<Term> a = term(rt.args[k], scope);
          if (!a) return std::nullopt;
          if (!type_compat(fn.arg_types[k], a->type)) {
            fail(rt.args[k].span, "argument " + std::to_string(k + 1) + " of " + rt.name +
                                      " must be " + m.type(fn.arg_types[k]).name);
            return std::nullopt;
          }
          t.args.push_back(std::move(*a));
        }
        return t;
      }
      case RTerm::K::Number: {
        std::optional<TypeId> ty = m.find_type(rt.name);
        if (!ty || m.type(*ty).is_builtin()) {
          fail(rt.span, "unknown type: " + rt.name);
          return std::nullopt;
        }
        if (!m.number_statement(*ty)) {
          fail(rt.span, "type " + rt.name + " has no number statement");
          return std::nullopt;
        }
        t.kind = Term::Kind::Number;
        t.number_type = *ty;
        t.type = m.natural_type();
        return t;
      }
      case RTerm::K::Cmp: {
        std::optional<Term> a = term(rt.args[0], scope);
        std::optional<Term> b = term(rt.args[1], scope);
        if (!a || !b) return std::nullopt;
        t.kind = Term::Kind::Builtin;
        t.type = m.boolean_type();
        if (rt.name == "==") {
          t.op = BuiltinOp::Eq;
        } else if (rt.name == "!=") {
          t.op = BuiltinOp::Ne;
        } else {
          if (!type_compat(m.natural_type(), a->type) || !type_compat(m.natural_type(), b->type)) {
            fail(rt.span, "comparison '" + rt.name + "' needs NaturalNum operands");
            return std::nullopt;
          }
          t.op = rt.name == "<" ? BuiltinOp::Lt
               : rt.name == "<=" ? BuiltinOp::Le
               : rt.name == ">" ? BuiltinOp::Gt
                                : BuiltinOp::Ge;
        }
        if ((t.op == BuiltinOp::Eq || t.op == BuiltinOp::Ne) && a->type != -1 && b->type != -1 &&
            a->type != b->type) {
          fail(rt.span, "equality operands have different types");
          return std::nullopt;
        }
        t.args.push_back(std::move(*a));
        t.args.push_back(std::move(*b));
        return t;
      }
    }
    return std::nullopt;
  }

  static bool numeric(const Value& v) { return v.is_real() || v.is_nat(); }

  // Return type expected by a distribution, -1 if any/unknown.
  TypeId dist_result_type(const DistSpec& spec) {
    switch (spec.kind) {
      case DistKind::Bernoulli:
      case DistKind::NoisyCopy: return m.boolean_type();
      case DistKind::UniformInt:
      case DistKind::Poisson:
      case DistKind::Geometric: return m.natural_type();
      case DistKind::TokenStringModel:
      case DistKind::StringConcatFormat: return m.string_type();
      case DistKind::UniformOverObjects: return spec.uniform_type;
      case DistKind::Categorical: {
        if (spec.categorical.empty()) return -1;
        switch (spec.categorical.front().first.kind()) {
          case Value::Kind::Bool: return m.boolean_type();
          case Value::Kind::Nat: return m.natural_type();
          case Value::Kind::Str: return m.string_type();
          default: return -1;
        }
      }
      default: return -1;
    }
  }

  std::optional<DistSpec> dist(const RDist& rd, const Scope& scope, bool allow_prior_ref) {
    static const std::map<std::string, DistKind> kinds = {
        {"Categorical", DistKind::Categorical},
        {"Bernoulli", DistKind::Bernoulli},
        {"Uniform", DistKind::UniformOverObjects},
        {"UniformOverObjects", DistKind::UniformOverObjects},
        {"UniformInt", DistKind::UniformInt},
        {"Poisson", DistKind::Poisson},
        {"Geometric", DistKind::Geometric},
        {"NoisyCopy", DistKind::NoisyCopy},
        {"TokenStringModel", DistKind::TokenStringModel},
        {"StringConcatFormat", DistKind::StringConcatFormat},
    };
    DistSpec spec;
    auto it = kinds.find(rd.name);
    if (it == kinds.end()) {
      const DistSpec* bound = m.prior(rd.name);
      if (!bound || !allow_prior_ref) {
        fail(rd.span, "unknown distribution: " + rd.name);
        return std::nullopt;
      }
      spec = *bound;  // start from the binding; use-site args are appended
      if (rd.has_catmap || !rd.kwargs.empty() || rd.dummy) {
        fail(rd.span, "a named prior takes only positional arguments");
        return std::nullopt;
      }
      for (const RTerm& a : rd.pargs) {
        std::optional<Term> t = term(a, scope);
        if (!t) return std::nullopt;
        spec.args.push_back(std::move(*t));
      }
      return spec;
    }

    spec.kind = it->second;
    spec.config = rd.kwargs;
    spec.categorical = rd.catmap;
    for (const RTerm& a : rd.pargs) {
      std::optional<Term> t = term(a, scope);
      if (!t) return std::nullopt;
      spec.args.push_back(std::move(*t));
    }

    switch (spec.kind) {
      case DistKind::Categorical:
        if (!rd.has_catmap || spec.categorical.empty()) {
          fail(rd.span, "Categorical needs a nonempty weight table");
          return std::nullopt;
        }
        for (const auto& [v, w] : spec.categorical) {
          if (w < 0) {
            fail(rd.span, "Categorical weights must be nonnegative");
            return std::nullopt;
          }
          if (v.kind() != spec.categorical.front().first.kind()) {
            fail(rd.span, "Categorical keys must share one type");
            return std::nullopt;
          }
        }
        break;
      case DistKind::UniformOverObjects: {
        if (!rd.dummy) {
          fail(rd.span, "Uniform needs a typed dummy, e.g. Uniform(Pub p)");
          return std::nullopt;
        }
        std::optional<TypeId> t = m.find_type(rd.dummy->first);
        if (!t || m.type(*t).is_builtin()) {
          fail(rd.span, "Uniform needs a user type, got " + rd.dummy->first);
          return std::nullopt;
        }
        spec.uniform_type = *t;
        break;
      }
      case DistKind::Bernoulli:
      case DistKind::Poisson:
      case DistKind::Geometric:
        if (spec.args.size() != 1) {
          fail(rd.span, rd.name + " takes exactly one argument");
          return std::nullopt;
        }
        break;
      case DistKind::UniformInt:
      case DistKind::NoisyCopy:
        if (spec.args.size() != 2) {
          fail(rd.span, rd.name + " takes exactly two arguments");
          return std::nullopt;
        }
        if (spec.kind == DistKind::NoisyCopy &&
            !type_compat(m.boolean_type(), spec.args[0].type)) {
          fail(rd.span, "NoisyCopy source must be Boolean");
          return std::nullopt;
        }
        break;
      case DistKind::TokenStringModel: {
        auto v = spec.config.find("vocab");
        if (v == spec.config.end() || !v->second.is_str()) {
          fail(rd.span, "TokenStringModel needs vocab=\"tok tok ...\"");
          return std::nullopt;
        }
        auto vocab = std::make_shared<std::vector<std::string>>(tokenize(v->second.as_str()));
        if (vocab->empty()) {
          fail(rd.span, "TokenStringModel vocabulary is empty");
          return std::nullopt;
        }
        spec.vocab = std::move(vocab);
        if (!spec.config.count("p") || !numeric(spec.config.at("p"))) {
          fail(rd.span, "TokenStringModel needs p=<length parameter>");
          return std::nullopt;
        }
        break;
      }
      case DistKind::StringConcatFormat:
        for (const Term& a : spec.args)
          if (!type_compat(m.string_type(), a.type)) {
            fail(rd.span, "StringConcatFormat components must be String");
            return std::nullopt;
          }
        if (spec.config.count("sep") && !spec.config.at("sep").is_str()) {
          fail(rd.span, "StringConcatFormat sep must be a string");
          return std::nullopt;
        }
        break;
      default: break;
    }
    return spec;
  }
};

}  // namespace

ParseResult parse_model(const std::string& source) {
  ParseResult result;
  Lexer lex(source, &result.errors);
  std::vector<Token> toks = lex.run();
  SyntaxParser sp(toks, result.errors);
  std::vector<RStatement> stmts = sp.run();

  Model model;
  Resolver rv{model, result.errors};

  // Declarations first: types, guaranteed objects, function signatures,
  // prior bindings and number statements in order. Bodies resolve afterwards
  // so functions can reference one another and themselves.
  for (const RStatement& st : stmts) {
    try {
      switch (st.k) {
        case RStatement::K::Type:
          model.add_type(st.name);
          break;
        case RStatement::K::Guaranteed: {
          std::optional<TypeId> t = model.find_type(st.type_name);
          if (!t) {
            rv.fail(st.span, "unknown type: " + st.type_name);
            break;
          }
          if (model.type(*t).is_builtin()) {
            rv.fail(st.span, "guaranteed objects need a user type, got " + st.type_name);
            break;
          }
          for (const std::string& sym : st.symbols) model.add_guaranteed(*t, sym);
          break;
        }
        case RStatement::K::Random: {
          FunctionSymbol fn;
          fn.name = st.name;
          std::optional<TypeId> ret = model.find_type(st.type_name);
          if (!ret) {
            rv.fail(st.span, "unknown type: " + st.type_name);
            break;
          }
          fn.return_type = *ret;
          bool ok = true;
          for (const RParam& p : st.params) {
            std::optional<TypeId> pt = model.find_type(p.type);
            if (!pt) {
              rv.fail(p.span, "unknown type: " + p.type);
              ok = false;
              break;
            }
            fn.arg_types.push_back(*pt);
          }
          if (ok) model.add_function(std::move(fn));
          break;
        }
        default: break;
      }
    } catch (const ModelError& e) {
      rv.fail(st.span, e.what());
    }
  }

  // Second pass: priors, number statements, dependency bodies.
  for (const RStatement& st : stmts) {
    try {
      switch (st.k) {
        case RStatement::K::Prior: {
          Scope empty;
          std::optional<DistSpec> spec = rv.dist(st.dist, empty, /*allow_prior_ref=*/false);
          if (spec) model.bind_prior(st.name, std::move(*spec));
          break;
        }
        case RStatement::K::Number: {
          std::optional<TypeId> t = model.find_type(st.type_name);
          if (!t) {
            rv.fail(st.span, "unknown type: " + st.type_name);
            break;
          }
          Scope empty;
          std::optional<DistSpec> spec = rv.dist(st.dist, empty, /*allow_prior_ref=*/true);
          if (!spec) break;
          TypeId want = rv.dist_result_type(*spec);
          if (want != -1 && want != model.natural_type()) {
            rv.fail(st.span, "number statement for " + st.type_name +
                                 " needs a NaturalNum-valued distribution");
            break;
          }
          model.add_number_statement(NumberStatement{*t, std::move(*spec)});
          break;
        }
        case RStatement::K::Random: {
          std::optional<FuncId> f = model.find_function(st.name);
          if (!f) break;  // signature failed in pass one
          const FunctionSymbol& fn = model.function(*f);
          if (fn.arg_types.size() != st.params.size()) break;
          DependencyStatement dep;
          dep.func = *f;
          for (const RParam& p : st.params) dep.param_names.push_back(p.name);
          dep.param_types = fn.arg_types;
          Scope scope{&dep.param_names, &dep.param_types};
          bool ok = true;
          for (const RClause& rc : st.clauses) {
            Clause c;
            if (rc.guard) {
              std::optional<Term> g = rv.term(*rc.guard, scope);
              if (!g) {
                ok = false;
                break;
              }
              if (!Resolver::type_compat(model.boolean_type(), g->type)) {
                rv.fail(rc.guard->span, "guard of " + st.name + " must be Boolean");
                ok = false;
                break;
              }
              c.guard = std::move(*g);
            }
            if (rc.is_dist) {
              std::optional<DistSpec> spec = rv.dist(rc.dist, scope, /*allow_prior_ref=*/true);
              if (!spec) {
                ok = false;
                break;
              }
              TypeId want = rv.dist_result_type(*spec);
              if (want != -1 && want != fn.return_type) {
                rv.fail(rc.dist.span, "distribution for " + st.name + " yields " +
                                          (want >= 0 ? model.type(want).name : "?") +
                                          ", function returns " +
                                          model.type(fn.return_type).name);
                ok = false;
                break;
              }
              c.body = Clause::Body::Dist;
              c.dist = std::move(*spec);
            } else {
              std::optional<Term> t = rv.term(rc.eq, scope);
              if (!t) {
                ok = false;
                break;
              }
              if (!Resolver::type_compat(fn.return_type, t->type)) {
                rv.fail(rc.eq.span, "value of " + st.name + " must be " +
                                        model.type(fn.return_type).name);
                ok = false;
                break;
              }
              c.body = Clause::Body::Equal;
              c.equal = std::move(*t);
            }
            dep.clauses.push_back(std::move(c));
          }
          if (ok) model.add_dependency(std::move(dep));
          break;
        }
        default: break;
      }
    } catch (const ModelError& e) {
      rv.fail(st.span, e.what());
    }
  }

  // Every random function needs its dependency (failed bodies already
  // reported; this catches silent scope failures).
  if (result.errors.empty()) {
    for (const FunctionSymbol& fn : model.functions())
      if (fn.dependency < 0)
        result.errors.push_back({{}, "function " + fn.name + " has no dependency statement"});
  }

  if (result.errors.empty()) result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Formatting.

namespace {

std::string format_real(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, p);
  // Keep a decimal marker so the literal reads back as Real, not NaturalNum.
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

std::string format_literal(const Model& m, const Value& v) {
  if (v.is_real()) return format_real(v.as_real());
  return v.to_string(m);
}

std::string format_term(const Model& m, const DependencyStatement* dep, const Term& t) {
  switch (t.kind) {
    case Term::Kind::Literal: return format_literal(m, t.literal);
    case Term::Kind::Param: return dep ? dep->param_names[t.param] : "?";
    case Term::Kind::Number: return "#" + m.type(t.number_type).name;
    case Term::Kind::Apply: {
      std::string out = m.function(t.func).name;
      if (!t.args.empty()) {
        out += "(";
        for (size_t i = 0; i < t.args.size(); ++i) {
          if (i) out += ", ";
          out += format_term(m, dep, t.args[i]);
        }
        out += ")";
      }
      return out;
    }
    case Term::Kind::Builtin: {
      switch (t.op) {
        case BuiltinOp::Succ: return "Succ(" + format_term(m, dep, t.args[0]) + ")";
        case BuiltinOp::Pred: return "Pred(" + format_term(m, dep, t.args[0]) + ")";
        default: {
          const char* op = t.op == BuiltinOp::Lt ? "<"
                         : t.op == BuiltinOp::Le ? "<="
                         : t.op == BuiltinOp::Gt ? ">"
                         : t.op == BuiltinOp::Ge ? ">="
                         : t.op == BuiltinOp::Eq ? "=="
                                                 : "!=";
          return format_term(m, dep, t.args[0]) + " " + op + " " + format_term(m, dep, t.args[1]);
        }
      }
    }
  }
  return "?";
}

std::string format_dist(const Model& m, const DependencyStatement* dep, const DistSpec& spec) {
  std::string out = dist_kind_name(spec.kind);
  std::vector<std::string> args;
  if (spec.kind == DistKind::Categorical) {
    std::string t = "{";
    for (size_t i = 0; i < spec.categorical.size(); ++i) {
      if (i) t += ", ";
      t += format_literal(m, spec.categorical[i].first) + ": " +
           format_real(spec.categorical[i].second);
    }
    t += "}";
    args.push_back(std::move(t));
  }
  if (spec.kind == DistKind::UniformOverObjects)
    args.push_back(m.type(spec.uniform_type).name + " x");
  for (const auto& [k, v] : spec.config) args.push_back(k + "=" + format_literal(m, v));
  for (const Term& t : spec.args) args.push_back(format_term(m, dep, t));
  if (args.empty() && spec.kind != DistKind::UniformOverObjects) return out;
  out += "(";
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += args[i];
  }
  out += ")";
  return out;
}

}  // namespace

std::string format_model(const Model& m) {
  std::ostringstream os;
  for (TypeId t : m.user_types()) os << "type " << m.type(t).name << ";\n";
  for (TypeId t : m.user_types()) {
    const auto& g = m.type(t).guaranteed;
    if (g.empty()) continue;
    os << "guaranteed " << m.type(t).name << " ";
    for (size_t i = 0; i < g.size(); ++i) {
      if (i) os << ", ";
      os << g[i];
    }
    os << ";\n";
  }
  for (const auto& [name, spec] : m.priors())
    os << "prior " << name << " = " << format_dist(m, nullptr, spec) << ";\n";
  for (const NumberStatement& num : m.numbers())
    os << "#" << m.type(num.type).name << " ~ " << format_dist(m, nullptr, num.prior) << ";\n";
  for (const FunctionSymbol& fn : m.functions()) {
    const DependencyStatement& dep = m.dependencies()[fn.dependency];
    os << "random " << m.type(fn.return_type).name << " " << fn.name;
    if (!dep.param_names.empty()) {
      os << "(";
      for (size_t i = 0; i < dep.param_names.size(); ++i) {
        if (i) os << ", ";
        os << m.type(dep.param_types[i]).name << " " << dep.param_names[i];
      }
      os << ")";
    }
    auto body = [&](const Clause& c) -> std::string {
      if (c.body == Clause::Body::Dist) return "~ " + format_dist(m, &dep, c.dist);
      if (c.body == Clause::Body::Equal) return "= " + format_term(m, &dep, c.equal);
      return "= null";
    };
    if (dep.clauses.size() == 1 && !dep.clauses[0].guard) {
      os << " " << body(dep.clauses[0]) << ";\n";
    } else {
      for (size_t i = 0; i < dep.clauses.size(); ++i) {
        const Clause& c = dep.clauses[i];
        os << "\n  ";
        if (c.guard) {
          os << (i ? "else if (" : "if (") << format_term(m, &dep, *c.guard) << ") then "
             << body(c);
        } else {
          os << "else " << body(c);
        }
      }
      os << ";\n";
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Ground terms, evidence, queries, bounds.

namespace {

std::optional<Term> resolve_ground(const Model& m, const RTerm& rt,
                                   std::vector<ParseError>& errors) {
  Model& mm = const_cast<Model&>(m);  // Resolver only reads when scope is empty
  Resolver rv{mm, errors};
  Scope empty;
  return rv.term(rt, empty);
}

}  // namespace

TermParseResult parse_ground_term(const Model& m, const std::string& text) {
  TermParseResult out;
  Lexer lex(text, &out.errors);
  std::vector<Token> toks = lex.run();
  SyntaxParser sp(toks, out.errors);
  std::optional<RTerm> rt = sp.term();
  if (!sp.at(Tok::End)) out.errors.push_back({sp.cur().span, "trailing input after term"});
  if (rt && out.errors.empty()) out.term = resolve_ground(m, *rt, out.errors);
  if (!out.errors.empty()) out.term.reset();
  return out;
}

namespace {

// A term usable as an evidence left-hand side: a function applied to
// guaranteed objects / literals (or a bare zero-ary function).
std::optional<BasicVariable> evidence_lhs(const Model& m, const Term& t,
                                          const SourceSpan& span,
                                          std::vector<ParseError>& errors) {
  if (t.kind != Term::Kind::Apply) {
    errors.push_back({span, "evidence left-hand side must be a function application"});
    return std::nullopt;
  }
  std::vector<Value> args;
  for (const Term& a : t.args) {
    if (a.kind != Term::Kind::Literal) {
      errors.push_back({span, "evidence arguments must be guaranteed objects or literals"});
      return std::nullopt;
    }
    args.push_back(a.literal);
  }
  return BasicVariable::app(t.func, std::move(args));
}

}  // namespace

EvidenceParseResult parse_evidence(const Model& m, const std::string& text) {
  EvidenceParseResult out;
  Lexer lex(text, &out.errors);
  std::vector<Token> toks = lex.run();
  SyntaxParser sp(toks, out.errors);
  while (!sp.at(Tok::End)) {
    SourceSpan span = sp.cur().span;
    if (sp.at(Tok::Semi)) {
      sp.take();
      continue;
    }
    if (sp.at(Tok::Hash)) {
      sp.take();
      std::string tyname = sp.expect_ident("type name");
      std::optional<TypeId> ty = tyname.empty() ? std::nullopt : m.find_type(tyname);
      if (!ty) {
        out.errors.push_back({span, "unknown type: " + tyname});
        sp.recover();
        continue;
      }
      if (!sp.expect(Tok::Assign, "'='")) {
        sp.recover();
        continue;
      }
      std::optional<Value> v = sp.literal();
      if (!v || !v->is_nat()) {
        out.errors.push_back({span, "evidence for a number variable needs a natural number"});
        sp.recover();
        continue;
      }
      out.evidence.items.emplace_back(BasicVariable::number(*ty), *v);
      continue;
    }
    std::optional<RTerm> rt = sp.term();
    if (!rt || !sp.expect(Tok::Assign, "'='")) {
      sp.recover();
      continue;
    }
    std::optional<Value> v = sp.literal();
    if (!v) {
      out.errors.push_back({sp.cur().span, "evidence value must be a literal"});
      sp.recover();
      continue;
    }
    size_t before = out.errors.size();
    std::optional<Term> t = resolve_ground(m, *rt, out.errors);
    if (!t || out.errors.size() > before) continue;
    std::optional<BasicVariable> var = evidence_lhs(m, *t, span, out.errors);
    if (!var) continue;
    out.evidence.items.emplace_back(std::move(*var), std::move(*v));
  }
  return out;
}

QueryParseResult parse_queries(const Model& m, const std::string& text) {
  QueryParseResult out;
  Lexer lex(text, &out.errors);
  std::vector<Token> toks = lex.run();
  SyntaxParser sp(toks, out.errors);
  while (!sp.at(Tok::End)) {
    if (sp.at(Tok::Semi)) {
      sp.take();
      continue;
    }
    SourceSpan span = sp.cur().span;
    if (!sp.at_ident("query")) {
      out.errors.push_back({span, "expected 'query <name> : <term>'"});
      sp.recover();
      continue;
    }
    sp.take();
    std::string name = sp.expect_ident("query name");
    if (name.empty() || !sp.expect(Tok::Colon, "':'")) {
      sp.recover();
      continue;
    }
    std::optional<RTerm> rt = sp.term();
    if (!rt) {
      sp.recover();
      continue;
    }
    size_t before = out.errors.size();
    std::optional<Term> t = resolve_ground(m, *rt, out.errors);
    if (!t || out.errors.size() > before) continue;
    if (!Resolver::type_compat(m.boolean_type(), t->type)) {
      out.errors.push_back({span, "query " + name + " must be Boolean-valued"});
      continue;
    }
    out.queries.push_back(Query{std::move(name), std::move(*t)});
  }
  return out;
}

BoundsParseResult parse_bounds(const Model& m, const std::string& text) {
  BoundsParseResult out;
  Lexer lex(text, &out.errors);
  std::vector<Token> toks = lex.run();
  SyntaxParser sp(toks, out.errors);
  while (!sp.at(Tok::End)) {
    if (sp.at(Tok::Semi)) {
      sp.take();
      continue;
    }
    SourceSpan span = sp.cur().span;
    if (sp.at_ident("bound")) {
      sp.take();
      if (!sp.expect(Tok::Hash, "'#'")) {
        sp.recover();
        continue;
      }
      std::string tyname = sp.expect_ident("type name");
      std::optional<TypeId> ty = tyname.empty() ? std::nullopt : m.find_type(tyname);
      if (!ty) {
        out.errors.push_back({span, "unknown type: " + tyname});
        sp.recover();
        continue;
      }
      if (!sp.expect(Tok::Le, "'<='")) {
        sp.recover();
        continue;
      }
      std::optional<Value> v = sp.literal();
      if (!v || !v->is_nat()) {
        out.errors.push_back({span, "bound needs a natural number"});
        sp.recover();
        continue;
      }
      out.bounds.number_bound[*ty] = v->as_nat();
      continue;
    }
    if (sp.at_ident("domain")) {
      sp.take();
      std::string fname = sp.expect_ident("function name");
      std::optional<FuncId> f = fname.empty() ? std::nullopt : m.find_function(fname);
      if (!f) {
        out.errors.push_back({span, "unknown function: " + fname});
        sp.recover();
        continue;
      }
      if (!sp.at_ident("in")) {
        out.errors.push_back({sp.cur().span, "expected 'in'"});
        sp.recover();
        continue;
      }
      sp.take();
      if (!sp.expect(Tok::LBrace, "'{'")) {
        sp.recover();
        continue;
      }
      std::vector<Value> values;
      while (!sp.at(Tok::RBrace) && !sp.at(Tok::End)) {
        std::optional<Value> v = sp.literal();
        if (!v) {
          out.errors.push_back({sp.cur().span, "domain values must be literals"});
          break;
        }
        values.push_back(std::move(*v));
        if (sp.at(Tok::Comma)) sp.take();
      }
      sp.expect(Tok::RBrace, "'}'");
      out.bounds.domain[*f] = std::move(values);
      continue;
    }
    out.errors.push_back({span, "expected 'bound' or 'domain'"});
    sp.recover();
  }
  return out;
}

}  // namespace relmh
