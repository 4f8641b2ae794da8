var $=Object.defineProperty;var L=(o,t,e)=>t in o?$(o,t,{enumerable:!0,configurable:!0,writable:!0,value:e}):o[t]=e;var a=(o,t,e)=>L(o,typeof t!="symbol"?t+"":t,e);(function(){const t=document.createElement("link").relList;if(t&&t.supports&&t.supports("modulepreload"))return;for(const n of document.querySelectorAll('link[rel="modulepreload"]'))s(n);new MutationObserver(n=>{for(const i of n)if(i.type==="childList")for(const r of i.addedNodes)r.tagName==="LINK"&&r.rel==="modulepreload"&&s(r)}).observe(document,{childList:!0,subtree:!0});function e(n){const i={};return n.integrity&&(i.integrity=n.integrity),n.referrerPolicy&&(i.referrerPolicy=n.referrerPolicy),n.crossOrigin==="use-credentials"?i.credentials="include":n.crossOrigin==="anonymous"?i.credentials="omit":i.credentials="same-origin",i}function s(n){if(n.ep)return;n.ep=!0;const i=e(n);fetch(n.href,i)}})();class x extends Error{constructor(t,e){super(e),this.status=t}}class S{constructor(t="",e=(...s)=>fetch(...s)){this.base=t,this.fetchImpl=e}async request(t,e){const s=await this.fetchImpl(this.base+t,e);if(!s.ok){let n=s.statusText;try{const i=await s.json();typeof(i==null?void 0:i.error)=="string"&&(n=i.error)}catch{}throw new x(s.status,n)}return s}async postJson(t,e){return this.request(t,{method:"POST",headers:{"content-type":"application/json"},body:JSON.stringify(e)})}async modelInfo(){return(await this.request("/api/model")).json()}async encode(t){return(await this.postJson("/api/encode",{window:t})).json()}async createSession(t){return(await this.postJson("/api/session",t)).json()}async step(t,e={}){return(await this.postJson(`/api/session/${t}/step`,e)).json()}async exportMidi(t){return(await this.request(`/api/session/${t}/export`)).arrayBuffer()}async uploadMidi(t,e="upload.mid"){const s=new FormData,n=t instanceof Blob?t:new Blob([t],{type:"audio/midi"});return s.append("file",n,e),(await this.request("/api/midi",{method:"POST",body:s})).json()}}function T(o,t,e){const s=[];for(let n=0;n<o.nPitches;n++){let i=-1;for(let r=0;r<=o.nCols;r++){const l=r<o.nCols&&o.at(n,r)!==0;l&&i<0&&(i=r),!l&&i>=0&&(s.push({pitch:t+n,startMs:i*e,durationMs:(r-i)*e}),i=-1)}}return s.sort((n,i)=>n.startMs-i.startMs||n.pitch-i.pitch),s}function _(o){return 440*Math.pow(2,(o-69)/12)}class P{constructor(){a(this,"ctx",null)}context(){return this.ctx||(this.ctx=new AudioContext),this.ctx}play(t){if(t.length===0)return;const e=this.context();e.resume();const s=e.currentTime+.05;for(const n of t){const i=e.createOscillator(),r=e.createGain();i.type="triangle",i.frequency.value=_(n.pitch);const l=s+n.startMs/1e3,u=l+n.durationMs/1e3;r.gain.setValueAtTime(.12,l),r.gain.setTargetAtTime(0,u-.03,.01),i.connect(r).connect(e.destination),i.start(l),i.stop(u+.05)}}}class d{constructor(t,e,s){a(this,"nPitches");a(this,"nCols");a(this,"cells");if(t<1||e<0)throw new Error(`bad grid shape ${t}x${e}`);if(this.nPitches=t,this.nCols=e,this.cells=s??new Uint8Array(t*e),this.cells.length!==t*e)throw new Error(`cell buffer ${this.cells.length} != ${t}x${e}`)}at(t,e){return this.cells[t*this.nCols+e]}set(t,e,s){this.cells[t*this.nCols+e]=s}slice(t,e){const s=new d(this.nPitches,e-t);for(let n=0;n<this.nPitches;n++)for(let i=t;i<e;i++)s.cells[n*s.nCols+(i-t)]=this.at(n,i);return s}concat(t){if(t.nPitches!==this.nPitches)throw new Error(`pitch count ${t.nPitches} != ${this.nPitches}`);const e=new d(this.nPitches,this.nCols+t.nCols);for(let s=0;s<this.nPitches;s++)e.cells.set(this.cells.subarray(s*this.nCols,(s+1)*this.nCols),s*e.nCols),e.cells.set(t.cells.subarray(s*t.nCols,(s+1)*t.nCols),s*e.nCols+this.nCols);return e}equals(t){return this.nPitches===t.nPitches&&this.nCols===t.nCols&&this.cells.every((e,s)=>e===t.cells[s])}lastSoundingCol(){for(let t=this.nCols-1;t>=0;t--)for(let e=0;e<this.nPitches;e++)if(this.at(e,t))return t+1;return 0}}function y(o,t,e){const s=new d(t,e);for(const[n,i,r]of o){if(r<1)throw new Error(`run length ${r} < 1`);if(n<0||n>=t||i<0||i+r>e)throw new Error(`run [${n}, ${i}, ${r}] outside ${t}x${e}`);for(let l=i;l<i+r;l++)s.set(n,l,1)}return s}function I(o){const t=[];for(let e=0;e<o.nPitches;e++){let s=-1;for(let n=0;n<=o.nCols;n++){const i=n<o.nCols&&o.at(e,n)!==0;i&&s<0&&(s=n),!i&&s>=0&&(t.push([e,s,n-s]),s=-1)}}return t}const E=8;function M(o,t=E){return o.map((s,n)=>({index:n,mag:Math.abs(s)})).sort((s,n)=>n.mag-s.mag||s.index-n.index).slice(0,Math.min(t,o.length)).map(s=>s.index)}class k{constructor(t,e=E){a(this,"dims",[]);a(this,"deltas",new Map);a(this,"persist",!1);this.latentDim=t,this.sliderCount=e}rankFrom(t){if(t.length!==this.latentDim)throw new Error(`mu length ${t.length} != latent dim ${this.latentDim}`);this.dims=M(t,this.sliderCount);for(const e of[...this.deltas.keys()])this.dims.includes(e)||this.deltas.delete(e)}setDelta(t,e){if(!this.dims.includes(t))throw new Error(`no slider for latent dim ${t}`);e===0?this.deltas.delete(t):this.deltas.set(t,e)}reset(){this.deltas.clear()}deltaVector(){if(this.deltas.size===0)return null;const t=new Array(this.latentDim).fill(0);for(const[e,s]of this.deltas)t[e]=s;return t}afterStep(t){this.persist||(this.reset(),this.rankFrom(t))}}class b extends Error{}class g{constructor(t,e){a(this,"roll");a(this,"sessionId",null);a(this,"threshold");a(this,"stepsTaken",0);a(this,"stepping",!1);a(this,"sliders");a(this,"thresholdDirty",!1);this.api=t,this.info=e,this.roll=new d(e.n_pitches,0),this.threshold=e.threshold,this.sliders=new k(e.latent_dim)}static async connect(t){return new g(t,await t.modelInfo())}expectedCols(){return this.info.window_cols+this.stepsTaken*this.info.stride_cols}checkColumnCount(){if(this.roll.nCols!==this.expectedCols())throw new Error(`roll has ${this.roll.nCols} columns, expected ${this.expectedCols()}`)}setThreshold(t){if(t<0||t>1)throw new Error(`threshold ${t} not in [0, 1]`);this.threshold=t,this.thresholdDirty=!0}async seedRandom(t){const e=await this.api.createSession({seed:t,threshold:this.threshold});await this.adopt(e.id,e.window,e.threshold)}async seedFromIngest(t){const e=this.info.window_cols,s=t.pitch_hi-t.pitch_lo+1,n=y(t.cells,s,t.n_cols);let i=n.slice(0,Math.min(e,n.nCols));i.nCols<e&&(i=i.concat(new d(i.nPitches,e-i.nCols)));const r=await this.api.createSession({window:I(i),threshold:this.threshold});await this.adopt(r.id,r.window,r.threshold)}async adopt(t,e,s){this.sessionId=t,this.threshold=s,this.thresholdDirty=!1,this.stepsTaken=0,this.roll=y(e,this.info.n_pitches,this.info.window_cols),this.checkColumnCount();const n=await this.api.encode(e);this.sliders.rankFrom(n.mu)}async step(){if(!this.sessionId)throw new Error("no active session");if(this.stepping)throw new Error("a step is already in flight");this.stepping=!0;try{const t={},e=this.sliders.deltaVector();e&&(t.latent_delta=e),this.thresholdDirty&&(t.threshold=this.threshold);let s;try{s=await this.api.step(this.sessionId,t)}catch(i){throw i instanceof x&&i.status===404?new b(`session ${this.sessionId} is gone`):i}const n=y(s.new_cols,this.info.n_pitches,this.info.stride_cols);return this.roll=this.roll.concat(n),this.stepsTaken=s.step,this.threshold=s.threshold,this.thresholdDirty=!1,this.checkColumnCount(),this.sliders.afterStep(s.latent.mu),n}finally{this.stepping=!1}}async exportMidi(){if(!this.sessionId)throw new Error("no active session");return this.api.exportMidi(this.sessionId)}}const h=7,C=9;function v(o){return{width:o.nCols*h,height:o.nPitches*C}}function D(o,t,e){const{width:s,height:n}=v(t);o.width=s,o.height=n;const i=o.getContext("2d");if(i){i.fillStyle="#14161c",i.fillRect(0,0,s,n),i.fillStyle="#1d2330",i.fillRect(0,0,e.seedCols*h,n);for(let r=0;r<t.nCols;r++)for(let l=0;l<t.nPitches;l++){if(!t.at(l,r))continue;const u=(t.nPitches-1-l)*C;i.fillStyle=r<e.seedCols?"#7aa2f7":"#9ece6a",i.fillRect(r*h+1,u+1,h-2,C-2)}i.strokeStyle="#3b4261",i.beginPath();for(let r=10;r<t.nCols;r+=10)i.moveTo(r*h+.5,0),i.lineTo(r*h+.5,n);i.stroke(),e.playheadCol!==void 0&&e.playheadCol<t.nCols&&(i.fillStyle="rgba(255, 200, 80, 0.25)",i.fillRect(e.playheadCol*h,0,h,n))}}const c=o=>{const t=document.getElementById(o);if(!t)throw new Error(`missing #${o}`);return t},w=c("banner");function m(o){w.textContent=o,w.classList.add("visible")}w.addEventListener("click",()=>w.classList.remove("visible"));async function f(o,t){try{await t()}catch(e){if(e instanceof b&&o){m("session expired, starting a fresh one"),await o.seedRandom(),p(o);return}m(e instanceof Error?e.message:String(e))}}const F=new P;function p(o){const t=c("roll");D(t,o.roll,{seedCols:o.info.window_cols});const{width:e}=v(o.roll);c("roll-scroll").scrollLeft=e,c("status").textContent=`T=${o.info.window_seconds}s  pitches ${o.info.pitch_lo}-${o.info.pitch_hi}  step ${o.stepsTaken}  columns ${o.roll.nCols}`;const s=c("threshold");s.value=o.threshold.toFixed(2),c("threshold-label").textContent=o.threshold.toFixed(2),R(o),c("step").disabled=o.stepping||!o.sessionId,c("export").disabled=!o.sessionId}function R(o){const t=c("sliders");t.innerHTML="";for(const e of o.sliders.dims){const s=document.createElement("label");s.className="slider-row";const n=o.sliders.deltas.get(e)??0,i=document.createElement("span");i.textContent=`z[${e}]`;const r=document.createElement("input");r.type="range",r.min="-3",r.max="3",r.step="0.1",r.value=String(n);const l=document.createElement("span");l.textContent=n.toFixed(1),r.addEventListener("input",()=>{o.sliders.setDelta(e,Number(r.value)),l.textContent=Number(r.value).toFixed(1)}),s.append(i,r,l),t.appendChild(s)}}async function O(){const o=new S("");let t;try{t=await g.connect(o)}catch(e){m(`cannot reach the composer service: ${e instanceof Error?e.message:e}`);return}c("step").addEventListener("click",()=>f(t,async()=>{const e=await t.step();p(t),F.play(T(e,t.info.pitch_lo,t.info.grid_ms))})),c("seed-random").addEventListener("click",()=>f(t,async()=>{const e=c("seed"),s=e.value===""?void 0:Number(e.value);await t.seedRandom(s),p(t)})),c("midi-file").addEventListener("change",e=>f(t,async()=>{var r;const s=e.target,n=(r=s.files)==null?void 0:r[0];if(!n)return;const i=await o.uploadMidi(await n.arrayBuffer(),n.name);i.dropped_notes>0&&m(`${i.dropped_notes} notes fell outside the model's pitch range`),await t.seedFromIngest(i),p(t),s.value=""})),c("threshold").addEventListener("change",e=>{const s=Number(e.target.value);t.setThreshold(s),c("threshold-label").textContent=s.toFixed(2)}),c("persist-sliders").addEventListener("change",e=>{t.sliders.persist=e.target.checked}),c("export").addEventListener("click",()=>f(t,async()=>{const e=await t.exportMidi(),s=URL.createObjectURL(new Blob([e],{type:"audio/midi"})),n=document.createElement("a");n.href=s,n.download="composition.mid",n.click(),URL.revokeObjectURL(s)})),await f(t,async()=>{await t.seedRandom(0),p(t)})}O();
