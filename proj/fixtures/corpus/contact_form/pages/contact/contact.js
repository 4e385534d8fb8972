var config = require('../../config.js')

Page({
  data: {
    submitting: false
  },

  onSubmit: function (e) {
    var form = e.detail.value
    if (!form.phone) {
      wx.showToast({ title: 'Phone required', icon: 'none' })
      return
    }
    this.setData({ submitting: true })
    this.saveContact(form.realName, form.phone, form.idCard)
  },

  saveContact: function (name, phone, idCard) {
    var payload = {
      name: name,
      mobile: phone,
      idNumber: idCard
    }
    wx.setStorageSync('lastContact', payload)
    wx.request({
      url: config.api + '/contact',
      method: 'POST',
      data: payload
    })
  }
})
