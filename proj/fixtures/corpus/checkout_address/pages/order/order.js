var api = require('../../utils/api.js')

Page({
  data: {
    address: null,
    total: 0
  },

  chooseAddress: function () {
    var that = this
    wx.chooseAddress({
      success: function (res) {
        that.setData({ address: res })
        that.submitAddress(res)
      }
    })
  },

  submitAddress: function (addr) {
    wx.request({
      url: api.host + '/order/address',
      method: 'POST',
      data: {
        userName: addr.userName,
        telNumber: addr.telNumber,
        detail: addr.detailInfo
      }
    })
  },

  pay: function (order) {
    wx.requestPayment({
      timeStamp: order.timeStamp,
      nonceStr: order.nonceStr,
      package: order.package,
      signType: 'MD5',
      paySign: order.paySign,
      success: function (res) {
        wx.showToast({ title: 'Paid' })
      }
    })
  }
})
