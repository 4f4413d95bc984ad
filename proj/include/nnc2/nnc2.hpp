#ifndef NNC2_NNC2_HPP
#define NNC2_NNC2_HPP

#include "nnc2/errors.hpp"
#include "nnc2/funcexpr.hpp"
#include "nnc2/jets.hpp"
#include "nnc2/socp.hpp"
#include "nnc2/convex_oracle.hpp"
#include "nnc2/whitney_ext.hpp"
#include "nnc2/onedim.hpp"
#include "nnc2/cz.hpp"
#include "nnc2/localgeom.hpp"
#include "nnc2/assemble.hpp"
#include "nnc2/serialize.hpp"

#endif
