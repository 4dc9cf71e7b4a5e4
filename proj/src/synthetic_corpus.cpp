#include <algorithm>
#include <map>

#include "featgraph/error.hpp"
#include "featgraph/rng.hpp"
#include "featgraph/synthetic_bench.hpp"

namespace featgraph::synth {

namespace {

constexpr std::string_view kPunct = R"(!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~)";

bool is_punct(char c) { return kPunct.find(c) != std::string_view::npos; }

using Slots = std::map<std::string, std::vector<std::string>, std::less<>>;

template <typename T>
const T& pick(const std::vector<T>& v, CounterRng& rng) {
  return v[rng.below(v.size())];
}

// Replaces every {slot} with a random entry of that slot's list. "{#}" is a
// number in [0, 1000) and "{##}" a small decimal. Braces around anything that
// is not a lowercase slot name are literal.
std::string fill(std::string_view tmpl, const Slots& slots, CounterRng& rng) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    const auto close = tmpl[i] == '{' ? tmpl.find('}', i) : std::string_view::npos;
    const auto name = close == std::string_view::npos ? std::string_view{} : tmpl.substr(i + 1, close - i - 1);
    const bool is_slot = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
      return c == '#' || (c >= 'a' && c <= 'z');
    });
    if (is_slot) {
      if (name == "#") {
        out += std::to_string(rng.below(1000));
      } else if (name == "##") {
        out += std::to_string(rng.below(100)) + "." + std::to_string(rng.below(100));
      } else {
        out += pick(slots.at(std::string(name)), rng);
      }
      i = close + 1;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

const Slots& common_slots() {
  static const Slots slots = {
      {"id", {"count", "value", "items", "result", "total", "index", "data", "node", "buffer", "config", "name",
              "path", "size", "key", "user", "score"}},
      {"fn", {"process", "load", "parse", "compute", "update", "render", "fetch", "merge", "filter", "build",
              "validate", "flatten", "encode", "reset"}},
      {"cls", {"Parser", "Model", "Cache", "Tree", "Graph", "Session", "Buffer", "Reader", "Writer", "Queue"}},
      {"cmd", {"ls", "grep", "cat", "cd", "mkdir", "rm", "cp", "mv", "git", "curl", "tar", "chmod", "find"}},
      {"flag", {"-l", "-r", "-a", "-v", "-n", "--force", "--quiet", "-rf", "--help", "-x"}},
      {"file", {"main.py", "index.js", "data.csv", "notes.txt", "config.yaml", "README.md", "build.sh", "app.log"}},
      {"dir", {"src", "lib", "home/user", "var/log", "etc", "tmp", "docs", "tests", "assets"}},
      {"host", {"example.com", "docs.python.org", "api.github.com", "news.site.org", "cdn.files.net"}},
      {"var", {"x", "y", "z", "n", "k", "a", "b", "t"}},
      {"op", {"+", "-", "*", "/", "^"}},
      {"fnm", {"sin", "cos", "log", "exp", "sqrt"}},
      {"word", {"time", "people", "world", "system", "problem", "water", "story", "market", "city", "idea",
                "family", "market", "future", "music", "river"}},
      {"adj", {"small", "bright", "quiet", "strange", "ancient", "simple", "modern", "careful", "early"}},
      {"verb", {"explains", "changes", "follows", "reaches", "builds", "opens", "describes", "remembers"}},
      {"tag", {"#tbt", "#mood", "#coding", "#weekend", "#news", "#travel", "#food"}},
      {"emo", {":)", ":(", ";)", ":D", "<3", "!!!", "??"}},
      {"handle", {"@alex", "@sam_dev", "@maria", "@news_bot", "@jo", "@kim"}},
      {"person", {"Alice Smith", "Bob Jones", "Carla Diaz", "Dev Patel", "Eve Martin"}},
      {"mail", {"alice@example.com", "bob@corp.org", "team@lists.dev", "support@help.net"}},
      {"month", {"Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"}},
      {"es", {"casa", "tiempo", "ciudad", "mundo", "agua", "trabajo", "noche", "libro", "camino", "gente"}},
      {"fr", {"maison", "temps", "ville", "monde", "eau", "travail", "nuit", "livre", "chemin", "gens"}},
      {"de", {"Haus", "Zeit", "Stadt", "Welt", "Wasser", "Arbeit", "Nacht", "Buch", "Weg", "Leute"}},
      {"ja", {"東京", "時間", "世界", "水", "仕事", "夜", "本", "道", "人々", "学校"}},
      {"jv", {"行きます", "見ます", "読みます", "書きます", "食べます", "話します"}},
      {"str", {"\"hello\"", "\"data\"", "'name'", "'value'", "\"ok\"", "'error'"}},
      {"bool", {"true", "false", "null"}},
  };
  return slots;
}

const std::array<std::vector<std::string_view>, kRegisterCount>& register_templates() {
  static const std::array<std::vector<std::string_view>, kRegisterCount> t = {{
      // python
      {"def {fn}({id}, {var}):\n    return {id} {op} {var}\n",
       "for {var} in range({#}):\n    {id}.append({var} * {#})\n",
       "class {cls}:\n    def __init__(self, {id}):\n        self.{id} = {id}\n",
       "if {id} is None:\n    raise ValueError({str})\n",
       "import os\n{id} = os.path.join({str}, {str})\n"},
      // javascript
      {"function {fn}({id}) {\n  return {id}.map(({var}) => {var} {op} {#});\n}\n",
       "const {id} = await fetch(`https://{host}/{dir}`);\n",
       "let {id} = [];\nfor (let {var} = 0; {var} < {#}; {var}++) { {id}.push({var}); }\n",
       "export default class {cls} extends Component {\n  render() { return null; }\n}\n"},
      // shell
      {"$ {cmd} {flag} /{dir}/{file}\n", "{cmd} {flag} {file} | grep {str} > /{dir}/{file}\n",
       "export PATH=$PATH:/{dir}/bin && {cmd} {flag}\n", "sudo {cmd} {flag} /{dir} 2>&1 | tail -n {#}\n"},
      // math
      {"{var} = {#} {op} {var}^2 {op} {##}\n", "f({var}) = {fnm}({var}) {op} {#}{var}\n",
       "\\int_0^{#} {fnm}({var}) d{var} = {##}\n", "({var} {op} {#})({var} {op} {#}) = {var}^2 {op} {#}\n"},
      // url / path
      {"https://{host}/{dir}/{file}?id={#}&q={id}\n", "/{dir}/{dir}/{file}\n", "C:\\{dir}\\{file}\n",
       "http://{host}:{#}/api/v{#}/{id}\n"},
      // json
      {"{\"{id}\": {#}, \"{id}\": {str}, \"ok\": {bool}}\n", "[{\"{id}\": {##}}, {\"{id}\": [{#}, {#}]}]\n",
       "{\"{id}\": {\"{id}\": {bool}, \"{id}\": null}}\n"},
      // social
      {"{handle} this is so {adj} {emo} {tag}\n", "lol the {word} today {emo} {emo} {tag} {tag}\n",
       "RT {handle}: new {word} drop!!! {tag}\n"},
      // prose
      {"The {adj} {word} {verb} the {word} of the {adj} {word}.\n",
       "In the {adj} {word}, every {word} {verb} a {word} that nobody expected.\n",
       "A {word} is never just a {word}; it {verb} the {adj} {word} around it.\n"},
      // email header
      {"From: {person} <{mail}>\nTo: {mail}\nSubject: Re: {word} {word}\nDate: {#} {month} 2023\n",
       "Cc: {mail}\nSubject: [{word}] {adj} {word} update\nMessage-ID: <{#}.{#}@{host}>\n"},
      // spanish
      {"La {es} de la {es} es muy grande y la {es} está cerca.\n",
       "Mañana vamos a la {es} con la {es} y el {es}.\n"},
      // french
      {"La {fr} de la {fr} est très belle et le {fr} est loin.\n",
       "Demain nous allons à la {fr} avec le {fr} et la {fr}.\n"},
      // german
      {"Die {de} und die {de} sind sehr groß, aber das {de} ist klein.\n",
       "Morgen gehen wir in die {de} mit der {de} und dem {de}.\n"},
      // japanese
      {"{ja}で{ja}を{jv}。\n", "{ja}の{ja}は{ja}です。{ja}に{jv}。\n"},
  }};
  return t;
}

const std::array<std::string_view, kCodeTemplateCount>& code_templates() {
  static const std::array<std::string_view, kCodeTemplateCount> t = {{
      "def {fn}({id}):\n    return {id} + {#}\n",
      "def {fn}({id}, {var}={#}):\n    if {id} > {var}:\n        return {id}\n    return {var}\n",
      "class {cls}:\n    def __init__(self, {id}):\n        self.{id} = {id}\n",
      "class {cls}({cls}):\n    pass\n",
      "for {var} in range({#}):\n    print({var})\n",
      "for {var}, {id} in enumerate({id}):\n    {id}[{var}] = {id} * {#}\n",
      "while {id} < {#}:\n    {id} += {#}\n",
      "{id} = [{var} * {var} for {var} in range({#})]\n",
      "{id} = {{var}: {var} + {#} for {var} in {id}}\n",
      "{id} = ({var} for {var} in {id} if {var} % {#} == 0)\n",
      "@property\ndef {id}(self):\n    return self._{id}\n",
      "@staticmethod\ndef {fn}({var}):\n    return {var} ** {#}\n",
      "try:\n    {id} = {fn}({id})\nexcept KeyError as e:\n    raise ValueError(e)\n",
      "try:\n    {fn}()\nfinally:\n    {id}.close()\n",
      "with open({str}) as f:\n    {id} = f.read()\n",
      "import {id}\nfrom {id} import {fn}\n",
      "lambda {var}: {var} * {#}\n",
      "if {id} is None:\n    {id} = []\nelif not {id}:\n    pass\n",
      "assert {id} == {#}, {str}\n",
      "async def {fn}({id}):\n    await {fn}({id})\n",
      "def {fn}(*args, **kwargs):\n    return {fn}(*args, **kwargs)\n",
      "{id}: int = {#}\n{id}: str = {str} if {id} else None\n",
      "return {id} and not {var} or {id}\n",
      "global {id}\n{id} = {id} - {#}\n",
      "def {fn}():\n    yield from range({#})\n",
      "{id} = {id}[{#}:{#}] or None\n",
      "{id}.update({{str}: {#}, {str}: True})\n",
      "del {id}[{#}]\n",
      "def {fn}(self, {id}):\n    self.{id}.append({id})\n    return self\n",
      "if __name__ == \"__main__\":\n    {fn}()\n",
      "{id} = {id} if {id} else {#}\n",
      "for {var} in {id}:\n    if {var} is not None:\n        continue\n    break\n",
      "class {cls}(Exception):\n    def __str__(self):\n        return {str}\n",
  }};
  return t;
}

struct DocumentSink {
  Tokenizer& tok;
  GeneratedCorpus& out;

  std::size_t size() const { return out.corpus.tokens.size(); }

  // Appends a document, truncated so the stream never exceeds `budget`.
  void add(std::string_view text, std::uint32_t kind, std::size_t budget) {
    auto ids = tok.encode(text);
    if (ids.empty() || size() >= budget) return;
    ids.resize(std::min(ids.size(), budget - size()));
    out.corpus.doc_starts.push_back(static_cast<std::uint32_t>(size()));
    out.corpus.tokens.insert(out.corpus.tokens.end(), ids.begin(), ids.end());
    out.doc_kind.push_back(kind);
  }
};

}  // namespace

const std::array<std::string_view, kRegisterCount> kRegisterNames = {
    "python", "javascript", "shell", "math", "url_path", "json", "social",
    "prose", "email_header", "spanish", "french", "german", "japanese"};

Tokenizer::Tokenizer(TokenVocab vocab) : vocab_(std::move(vocab)) {
  for (TokenId i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_.tokens[i], i);
}

TokenId Tokenizer::id_of(const std::string& token) {
  auto [it, inserted] = ids_.try_emplace(token, static_cast<TokenId>(vocab_.size()));
  if (inserted) vocab_.tokens.push_back(token);
  return it->second;
}

std::vector<std::string> Tokenizer::split(std::string_view text) {
  std::vector<std::string> out;
  std::string prefix;
  auto flush_prefix = [&] {
    if (!prefix.empty()) out.push_back(std::exchange(prefix, {}));
  };
  for (std::size_t i = 0; i < text.size();) {
    const char c = text[i];
    if (c == '\n') {
      flush_prefix();
      out.emplace_back("\n");
      ++i;
    } else if (c == ' ' || c == '\t') {
      // Only one space may prefix the next token; earlier ones stand alone.
      flush_prefix();
      prefix = std::string(1, c);
      ++i;
    } else if (is_punct(c)) {
      out.push_back(std::exchange(prefix, {}) + c);
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != '\n' && !is_punct(text[j])) ++j;
      out.push_back(std::exchange(prefix, {}) + std::string(text.substr(i, j - i)));
      i = j;
    }
  }
  flush_prefix();
  return out;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) {
  std::vector<TokenId> ids;
  for (const auto& t : split(text)) ids.push_back(id_of(t));
  return ids;
}

GeneratedCorpus gen_mixed_corpus(const MixedCorpusOptions& options, Tokenizer* shared) {
  if (options.token_budget < 1000) throw Error(Errc::InvalidArgument, "mixed corpus budget must be >= 1000");
  double total_weight = 0.0;
  for (double w : options.weights) {
    if (w < 0.0) throw Error(Errc::InvalidArgument, "register weights must be non-negative");
    total_weight += w;
  }
  if (total_weight <= 0.0) throw Error(Errc::InvalidArgument, "register weights sum to zero");

  Tokenizer local;
  Tokenizer& tok = shared ? *shared : local;
  GeneratedCorpus out;
  DocumentSink sink{tok, out};
  CounterRng rng(options.seed, 0x6d69786564ULL);
  const auto& templates = register_templates();

  for (std::size_t doc = 0; sink.size() < options.token_budget; ++doc) {
    std::size_t reg = doc % kRegisterCount;
    if (doc >= kRegisterCount) {
      double target = rng.uniform() * total_weight;
      for (reg = 0; reg + 1 < kRegisterCount && target >= options.weights[reg]; ++reg) target -= options.weights[reg];
    }
    // A document is 2-4 template instances of one register.
    std::string text;
    const auto parts = 2 + rng.below(3);
    for (std::uint64_t p = 0; p < parts; ++p) text += fill(pick(templates[reg], rng), common_slots(), rng);
    sink.add(text, static_cast<std::uint32_t>(reg), options.token_budget);
  }
  out.vocab = tok.vocab();
  return out;
}

GeneratedCorpus gen_code_corpus(std::uint64_t seed, std::size_t n_snippets, Tokenizer* shared) {
  if (n_snippets < 1) throw Error(Errc::InvalidArgument, "code corpus needs at least one snippet");
  Tokenizer local;
  Tokenizer& tok = shared ? *shared : local;
  GeneratedCorpus out;
  DocumentSink sink{tok, out};
  CounterRng rng(seed, 0x636f6465ULL);
  const auto& templates = code_templates();
  for (std::size_t i = 0; i < n_snippets; ++i) {
    const std::size_t t = i < kCodeTemplateCount ? i : rng.below(kCodeTemplateCount);
    sink.add(fill(templates[t], common_slots(), rng), static_cast<std::uint32_t>(t), SIZE_MAX);
  }
  out.vocab = tok.vocab();
  return out;
}

ActivationDump corpus_dump(const GeneratedCorpus& corpus, std::uint64_t seed, std::string source) {
  ActivationDump d;
  d.vocab = corpus.vocab;
  d.corpus = corpus.corpus;
  d.meta.seed = seed;
  d.meta.source = std::move(source);
  return d;
}

}  // namespace featgraph::synth
