#pragma once

#include "mdnomad/bimodal.hpp"
#include "mdnomad/checkpoint.hpp"
#include "mdnomad/commands.hpp"
#include "mdnomad/config.hpp"
#include "mdnomad/dataset.hpp"
#include "mdnomad/design.hpp"
#include "mdnomad/elliptic.hpp"
#include "mdnomad/error.hpp"
#include "mdnomad/evaluate.hpp"
#include "mdnomad/kcde.hpp"
#include "mdnomad/metrics.hpp"
#include "mdnomad/mixture.hpp"
#include "mdnomad/model.hpp"
#include "mdnomad/nn.hpp"
#include "mdnomad/predict.hpp"
#include "mdnomad/problems.hpp"
#include "mdnomad/random.hpp"
#include "mdnomad/random_field.hpp"
#include "mdnomad/sde.hpp"
#include "mdnomad/spectral.hpp"
#include "mdnomad/timing.hpp"
#include "mdnomad/train.hpp"
