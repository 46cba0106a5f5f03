#pragma once

#include <string>

#include "pocbounds/errors.hpp"
#include "pocbounds/scm.hpp"

namespace pocbounds {

/// Coefficient sets for the two built-in benchmark models, embedded so the
/// library and CLI work without locating the shipped data files. The
/// files data/model1.json and data/model2.json hold the same values; a
/// test asserts they stay identical.
inline ScmSpec builtin_model1() {
  ScmSpec spec;
  spec.uz_probs = {
      0.352913861526,
      0.460995855543,
      0.331702473392,
      0.885505026779,
      0.017026872706,
      0.380772701708,
      0.028092602705,
      0.220819399962,
      0.617742227477,
      0.981975046713,
      0.142042291381,
      0.833602592350,
      0.882938907115,
      0.542143191999,
      0.085023436884,
      0.645357252864,
      0.863787135134,
      0.460539711624,
      0.314014079207,
      0.685879388218};
  spec.ux_prob = 0.601680857267;
  spec.uy_prob = 0.497668975278;
  spec.beta_x = {
      0.259223510143,
      -0.658140989167,
      -0.75025831768,
      0.162906462426,
      0.652023463285,
      -0.0892939586541,
      0.421469107769,
      -0.443129684766,
      0.802624388789,
      -0.225740978499,
      0.716621631717,
      0.0650682260309,
      -0.220690334026,
      0.156355773665,
      -0.50693672491,
      -0.707060278115,
      0.418812816935,
      -0.0822118703986,
      0.769299853833,
      -0.511585391002};
  spec.beta_y = {
      -0.792867111918,
      0.759967136147,
      0.55437722369,
      0.503970540409,
      -0.527187144651,
      0.378619988091,
      0.269255196301,
      0.671597043594,
      0.396010142274,
      0.325228576643,
      0.657808327574,
      0.801655023993,
      0.0907679484097,
      -0.0713852594543,
      -0.0691046005285,
      -0.222582013343,
      -0.848408031595,
      -0.584285069026,
      -0.324874831799,
      0.625621583197};
  spec.c = -0.77953605542;
  return spec;
}

inline ScmSpec builtin_model2() {
  ScmSpec spec;
  spec.uz_probs = {
      0.524110233482,
      0.689566064108,
      0.180145428970,
      0.317153536644,
      0.046268153873,
      0.340145244411,
      0.100912238566,
      0.772038172066,
      0.913108434869,
      0.364272290967,
      0.063667554704,
      0.454839320009,
      0.586687215140,
      0.018824647595,
      0.871017316787,
      0.164966968157,
      0.578925020078,
      0.983082980658,
      0.018033993991,
      0.074629121266};
  spec.ux_prob = 0.29908139311;
  spec.uy_prob = 0.9226108109253;
  spec.beta_x = {
      0.843870221861,
      0.178759296447,
      -0.372349746729,
      -0.950904544846,
      -0.439457721339,
      -0.725970103834,
      -0.791203963585,
      -0.843183562918,
      -0.68422616618,
      -0.782051030131,
      -0.434420454146,
      -0.445019418094,
      0.751698021555,
      -0.185984172192,
      0.191948271392,
      0.401334543567,
      0.331387702568,
      0.522595634402,
      -0.928734581669,
      0.203436441511};
  spec.beta_y = {
      -0.453251661832,
      0.424563325534,
      0.0924810605305,
      0.312680246141,
      0.7676961338,
      0.124337421843,
      -0.435341306455,
      0.248957751703,
      -0.161303883519,
      -0.537653062121,
      -0.222087991408,
      0.190167775134,
      -0.788147770713,
      -0.593030174012,
      -0.308066297974,
      0.218776507777,
      -0.751253645088,
      -0.11151455376,
      0.785227235182,
      -0.568046522383};
  spec.c = 0.975140894243;
  return spec;
}

inline ScmSpec builtin_model_by_name(const std::string& name) {
  if (name == "model1") return builtin_model1();
  if (name == "model2") return builtin_model2();
  throw ValidationError("unknown built-in model '" + name +
                        "' (expected model1 or model2)");
}

}  // namespace pocbounds
